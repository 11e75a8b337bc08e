//! Two-qubit Clifford group as signed symplectic tableaus with cached
//! unitaries and minimal-CZ native decompositions.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{cz_unitary, CMatrix};

pub const GROUP_ORDER: usize = 11_520;
pub const SINGLE_QUBIT_ORDER: usize = 24;

/// Two-qubit Pauli operator `i^phase · X^x · Z^z`. Bit 0 of `x` and `z`
/// addresses the fixed qubit (left Kronecker factor), bit 1 the tunable one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pauli {
    pub x: u8,
    pub z: u8,
    pub phase: u8,
}

impl Pauli {
    pub const IDENTITY: Pauli = Pauli { x: 0, z: 0, phase: 0 };

    pub const fn new(x: u8, z: u8, phase: u8) -> Self {
        Self { x, z, phase: phase % 4 }
    }

    /// Operator product `self · other`.
    pub fn mul(self, other: Pauli) -> Pauli {
        // Z^a X^b = (−1)^{a·b} X^b Z^a
        let swap = 2 * (self.z & other.x).count_ones() as u8;
        Pauli { x: self.x ^ other.x, z: self.z ^ other.z, phase: (self.phase + other.phase + swap) % 4 }
    }

    /// Hermitian Paulis carry `i^{#Y}`; anything else is not an observable.
    pub fn is_hermitian(self) -> bool {
        (self.phase + 4 - (self.x & self.z).count_ones() as u8 % 4) % 2 == 0
    }

    /// True when this is minus the Hermitian Pauli with the same support.
    pub fn is_negative(self) -> bool {
        (self.phase + 4 - (self.x & self.z).count_ones() as u8 % 4) % 4 == 2
    }

    pub fn commutes_with(self, other: Pauli) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    pub fn matrix(self) -> CMatrix {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let factor = |q: u8| {
            let x = (self.x >> q) & 1 == 1;
            let z = (self.z >> q) & 1 == 1;
            // X^x Z^z, column-major
            let m = match (x, z) {
                (false, false) => [one, zero, zero, one],
                (true, false) => [zero, one, one, zero],
                (false, true) => [one, zero, zero, -one],
                (true, true) => [zero, one, -one, zero],
            };
            CMatrix::from_column_slice(2, 2, &m)
        };
        factor(0).kronecker(&factor(1)) * Complex64::i().powu(self.phase as u32)
    }
}

/// Images of the generators `X_f, Z_f, X_t, Z_t` under conjugation
/// `P ↦ U P U†`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tableau {
    pub images: [Pauli; 4],
}

const GENERATORS: [Pauli; 4] =
    [Pauli::new(1, 0, 0), Pauli::new(0, 1, 0), Pauli::new(2, 0, 0), Pauli::new(0, 2, 0)];

impl Tableau {
    pub fn identity() -> Self {
        Self { images: GENERATORS }
    }

    /// Image of an arbitrary Pauli: `i^k X^x Z^z ↦ i^k T(X)^x T(Z)^z`.
    pub fn conjugate(&self, p: Pauli) -> Pauli {
        let mut out = Pauli { x: 0, z: 0, phase: p.phase };
        for q in 0..2 {
            if (p.x >> q) & 1 == 1 {
                out = out.mul(self.images[2 * q]);
            }
        }
        for q in 0..2 {
            if (p.z >> q) & 1 == 1 {
                out = out.mul(self.images[2 * q + 1]);
            }
        }
        out
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Tableau) -> Tableau {
        Tableau { images: self.images.map(|p| next.conjugate(p)) }
    }

    /// Canonical key: the 16 symplectic bits above the 4 sign bits.
    pub fn key(&self) -> u32 {
        let mut sym = 0u32;
        let mut signs = 0u32;
        for (g, p) in self.images.iter().enumerate() {
            sym |= ((p.x as u32) | ((p.z as u32) << 2)) << (4 * g);
            signs |= (p.is_negative() as u32) << g;
        }
        (sym << 4) | signs
    }

    /// Hermitian images obeying the canonical commutation relations.
    pub fn is_valid(&self) -> bool {
        if !self.images.iter().all(|p| p.is_hermitian() && (p.x | p.z) != 0) {
            return false;
        }
        (0..4).all(|a| {
            (0..4).all(|b| {
                let anti = a != b && a / 2 == b / 2;
                self.images[a].commutes_with(self.images[b]) != anti
            })
        })
    }

    /// Read the tableau off a 4×4 Clifford unitary; `None` if `u` does not
    /// map Paulis to Paulis.
    pub fn from_unitary(u: &CMatrix) -> Option<Tableau> {
        if u.nrows() != 4 || u.ncols() != 4 {
            return None;
        }
        let mut images = [Pauli::IDENTITY; 4];
        for (g, image) in GENERATORS.iter().zip(images.iter_mut()) {
            let m = u * g.matrix() * u.adjoint();
            *image = identify_pauli(&m)?;
        }
        Some(Tableau { images })
    }
}

fn identify_pauli(m: &CMatrix) -> Option<Pauli> {
    for x in 0..4u8 {
        for z in 0..4u8 {
            let base = Pauli::new(x, z, 0).matrix();
            let c = (base.adjoint() * m).trace() / 4.0;
            if c.norm() > 0.5 {
                let k = (c.arg() / std::f64::consts::FRAC_PI_2).round().rem_euclid(4.0) as u8;
                let expected = Complex64::i().powu(k as u32);
                return ((c - expected).norm() < 1e-6).then_some(Pauli::new(x, z, k));
            }
        }
    }
    None
}

/// A group element by its index in the canonical enumeration (tableaus
/// sorted by key): `index = 16·symplectic_rank + sign_bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CliffordElement(pub u16);

impl CliffordElement {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn tableau(self) -> Tableau {
        CliffordGroup::get().tableaus[self.index()]
    }

    pub fn unitary(self) -> &'static CMatrix {
        &CliffordGroup::get().unitaries[self.index()]
    }
}

/// One native operation: a layer of simultaneous single-qubit Cliffords
/// (indices into the 24-element single-qubit group) or a CZ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NativeOp {
    Local { fixed: u8, tunable: u8 },
    Cz,
}

/// Native operations in time order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NativeSequence(pub Vec<NativeOp>);

impl NativeSequence {
    pub fn cz_count(&self) -> usize {
        self.0.iter().filter(|op| matches!(op, NativeOp::Cz)).count()
    }

    /// Product of the operations' unitaries (later operations on the left).
    pub fn unitary(&self) -> CMatrix {
        let group = CliffordGroup::get();
        let mut u = CMatrix::identity(4, 4);
        for op in &self.0 {
            u = group.native_unitary(*op) * u;
        }
        u
    }
}

pub struct CliffordGroup {
    tableaus: Vec<Tableau>,
    unitaries: Vec<CMatrix>,
    lookup: HashMap<u32, u16>,
    inverses: Vec<u16>,
    compiled: Vec<NativeSequence>,
    single: Vec<CMatrix>,
    locals: Vec<u16>,
    cz: u16,
}

fn hadamard() -> CMatrix {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    CMatrix::from_column_slice(2, 2, &[h, h, h, -h])
}

fn phase_gate() -> CMatrix {
    let (one, zero) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    CMatrix::from_column_slice(2, 2, &[one, zero, zero, Complex64::i()])
}

/// All products of `generators`, breadth first from the identity. Elements
/// are identified by `key(unitary)`.
fn closure(generators: &[CMatrix], key: impl Fn(&CMatrix) -> u32) -> Vec<CMatrix> {
    let dim = generators[0].nrows();
    let start = CMatrix::identity(dim, dim);
    let mut seen = HashMap::from([(key(&start), 0usize)]);
    let mut elements = vec![start];
    let mut head = 0;
    while head < elements.len() {
        for g in generators {
            let next = g * &elements[head];
            let k = key(&next);
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(k) {
                e.insert(elements.len());
                elements.push(next);
            }
        }
        head += 1;
    }
    elements
}

impl CliffordGroup {
    /// The group, built on first use.
    pub fn get() -> &'static CliffordGroup {
        static GROUP: OnceLock<CliffordGroup> = OnceLock::new();
        GROUP.get_or_init(CliffordGroup::build)
    }

    fn build() -> CliffordGroup {
        let id2 = CMatrix::identity(2, 2);
        let tableau_key = |u: &CMatrix| Tableau::from_unitary(u).expect("generator products are Clifford").key();

        let single_key = |u: &CMatrix| tableau_key(&u.kronecker(&id2));
        let mut single = closure(&[hadamard(), phase_gate()], single_key);
        single.sort_by_key(single_key);
        assert_eq!(single.len(), SINGLE_QUBIT_ORDER);

        let generators = [
            hadamard().kronecker(&id2),
            id2.kronecker(&hadamard()),
            phase_gate().kronecker(&id2),
            id2.kronecker(&phase_gate()),
            cz_unitary(),
        ];
        let mut elements: Vec<(Tableau, CMatrix)> = closure(&generators, tableau_key)
            .into_iter()
            .map(|u| (Tableau::from_unitary(&u).expect("Clifford"), u))
            .collect();
        assert_eq!(elements.len(), GROUP_ORDER);
        elements.sort_by_key(|(t, _)| t.key());
        let (tableaus, unitaries): (Vec<_>, Vec<_>) = elements.into_iter().unzip();
        let lookup: HashMap<u32, u16> = tableaus.iter().enumerate().map(|(i, t)| (t.key(), i as u16)).collect();
        let find = |t: &Tableau| lookup[&t.key()];
        let inverses = unitaries
            .iter()
            .map(|u| find(&Tableau::from_unitary(&u.adjoint()).expect("inverse is Clifford")))
            .collect();
        let locals: Vec<u16> = (0..SINGLE_QUBIT_ORDER * SINGLE_QUBIT_ORDER)
            .map(|k| {
                let u = single[k / SINGLE_QUBIT_ORDER].kronecker(&single[k % SINGLE_QUBIT_ORDER]);
                find(&Tableau::from_unitary(&u).expect("local Clifford"))
            })
            .collect();
        let cz = find(&Tableau::from_unitary(&cz_unitary()).expect("CZ is Clifford"));

        let mut group =
            CliffordGroup { tableaus, unitaries, lookup, inverses, compiled: Vec::new(), single, locals, cz };
        group.compiled = group.compile_all();
        group
    }

    /// Minimal-CZ decompositions `L₀ (CZ L₁) … (CZ L_k)`. Every layer of the
    /// search assigns whole right cosets of the local subgroup, so the first
    /// assignment of an element uses the fewest CZs.
    fn compile_all(&self) -> Vec<NativeSequence> {
        let n = self.tableaus.len();
        let mut out: Vec<Option<NativeSequence>> = vec![None; n];
        let local_op = |k: usize| NativeOp::Local {
            fixed: (k / SINGLE_QUBIT_ORDER) as u8,
            tunable: (k % SINGLE_QUBIT_ORDER) as u8,
        };
        let mut frontier = Vec::new();
        for (k, &idx) in self.locals.iter().enumerate() {
            out[idx as usize] = Some(NativeSequence(vec![local_op(k)]));
            frontier.push(idx);
        }
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &e in &frontier {
                let f = self.compose_index(e, self.cz);
                if out[f as usize].is_some() {
                    continue;
                }
                let base = out[e as usize].clone().expect("frontier elements are compiled");
                for (k, &l) in self.locals.iter().enumerate() {
                    let g = self.compose_index(f, l);
                    let mut seq = base.clone();
                    seq.0.push(NativeOp::Cz);
                    seq.0.push(local_op(k));
                    out[g as usize] = Some(seq);
                    next.push(g);
                }
            }
            frontier = next;
        }
        out.into_iter().map(|s| s.expect("every element reachable")).collect()
    }

    fn compose_index(&self, a: u16, b: u16) -> u16 {
        let t = self.tableaus[a as usize].then(&self.tableaus[b as usize]);
        self.lookup[&t.key()]
    }

    pub fn order(&self) -> usize {
        self.tableaus.len()
    }

    pub fn element(&self, index: usize) -> CliffordElement {
        assert!(index < self.order(), "Clifford index {index} out of range");
        CliffordElement(index as u16)
    }

    pub fn elements(&self) -> impl Iterator<Item = CliffordElement> + '_ {
        (0..self.order()).map(|i| CliffordElement(i as u16))
    }

    pub fn identity(&self) -> CliffordElement {
        self.find(&Tableau::identity()).expect("identity present")
    }

    pub fn cz(&self) -> CliffordElement {
        CliffordElement(self.cz)
    }

    pub fn find(&self, t: &Tableau) -> Option<CliffordElement> {
        self.lookup.get(&t.key()).map(|&i| CliffordElement(i))
    }

    /// `a` followed by `b`.
    pub fn compose(&self, a: CliffordElement, b: CliffordElement) -> CliffordElement {
        CliffordElement(self.compose_index(a.0, b.0))
    }

    pub fn invert(&self, a: CliffordElement) -> CliffordElement {
        CliffordElement(self.inverses[a.index()])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CliffordElement {
        CliffordElement(rng.random_range(0..self.order()) as u16)
    }

    pub fn compile(&self, a: CliffordElement) -> &NativeSequence {
        &self.compiled[a.index()]
    }

    /// 2×2 unitary of single-qubit Clifford `k`.
    pub fn single_qubit(&self, k: usize) -> &CMatrix {
        &self.single[k]
    }

    pub fn native_unitary(&self, op: NativeOp) -> CMatrix {
        match op {
            NativeOp::Local { fixed, tunable } => {
                self.single[fixed as usize].kronecker(&self.single[tunable as usize])
            }
            NativeOp::Cz => cz_unitary(),
        }
    }
}

pub fn clifford_sample<R: Rng + ?Sized>(rng: &mut R) -> CliffordElement {
    CliffordGroup::get().sample(rng)
}

pub fn clifford_compose(a: CliffordElement, b: CliffordElement) -> CliffordElement {
    CliffordGroup::get().compose(a, b)
}

pub fn clifford_invert(a: CliffordElement) -> CliffordElement {
    CliffordGroup::get().invert(a)
}

pub fn compile_to_native(c: CliffordElement) -> &'static NativeSequence {
    CliffordGroup::get().compile(c)
}

/// Decomposition of `c` followed by an interleaved CZ, i.e. the element
/// `c·CZ` written as a product of a Clifford and a CZ.
pub fn compile_interleaved(c: CliffordElement) -> NativeSequence {
    let mut seq = compile_to_native(c).clone();
    seq.0.push(NativeOp::Cz);
    seq
}

/// Equality up to a global phase.
pub fn equal_up_to_phase(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
    let overlap = (a.adjoint() * b).trace();
    if overlap.norm() < 1e-12 {
        return false;
    }
    let phase = overlap / overlap.norm();
    (a * phase - b).iter().all(|z| z.norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_products_match_matrices() {
        for a in 0..64u8 {
            for b in 0..64u8 {
                let p = Pauli::new(a & 3, (a >> 2) & 3, a >> 4);
                let q = Pauli::new(b & 3, (b >> 2) & 3, b >> 4);
                let want = p.matrix() * q.matrix();
                assert!((p.mul(q).matrix() - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_signs() {
        // Y = i·XZ
        let y = Pauli::new(1, 1, 1);
        assert!(y.is_hermitian() && !y.is_negative());
        let m = y.matrix();
        assert!((m.adjoint() - &m).norm() < 1e-12);
        assert!(Pauli::new(1, 1, 3).is_negative());
        assert!(!Pauli::new(1, 1, 0).is_hermitian());
    }

    #[test]
    fn cz_tableau() {
        let t = Tableau::from_unitary(&cz_unitary()).unwrap();
        assert_eq!(t.images[0], Pauli::new(1, 2, 0)); // X_f → X_f Z_t
        assert_eq!(t.images[1], Pauli::new(0, 1, 0));
        assert_eq!(t.images[2], Pauli::new(2, 1, 0)); // X_t → Z_f X_t
        assert_eq!(t.images[3], Pauli::new(0, 2, 0));
        assert!(t.is_valid());
    }

    #[test]
    fn single_qubit_group_size() {
        let g = CliffordGroup::get();
        assert_eq!(g.single.len(), 24);
        assert_eq!(g.locals.len(), 576);
    }
}
