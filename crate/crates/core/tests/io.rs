use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use paracz::benchmarking::{ecdf_with_band, run_rb, ChannelSchedule, DecayFit, NativeChannels, RbConfig};
use paracz::calibration::ChevronDataset;
use paracz::dynamics::{pauli_transfer_matrix, CMatrix};
use paracz::io::*;
use paracz::{Error, FluxPulse, Superoperator};

fn meta() -> Metadata {
    Metadata::new(br#"{"seed": 5}"#, Some(5), "0.1.0")
}

fn round_trip<T, W, R>(value: &T, write: W, read: R) -> (Metadata, T)
where
    W: Fn(&mut Vec<u8>, &Metadata, &T) -> paracz::Result<()>,
    R: Fn(&[u8]) -> paracz::Result<(Metadata, T)>,
{
    let mut first = Vec::new();
    write(&mut first, &meta(), value).unwrap();
    let (m, back) = read(&first).unwrap();
    // Writing what was loaded reproduces the file byte for byte.
    let mut second = Vec::new();
    write(&mut second, &meta(), &back).unwrap();
    assert_eq!(String::from_utf8(first).unwrap(), String::from_utf8(second).unwrap());
    (m, back)
}

proptest! {
    #[test]
    fn ecdf_round_trips(samples in prop::collection::vec(-1.0f64..1.0, 2..40)) {
        let ecdf = ecdf_with_band(&samples).unwrap();
        let (m, back) = round_trip(&ecdf, |w, m, v| write_ecdf_csv(w, m, v), |r| read_ecdf_csv(r));
        prop_assert_eq!(back, ecdf);
        prop_assert_eq!(m.seed, Some(5));
    }

    #[test]
    fn real_matrices_round_trip(values in prop::collection::vec(-1e3f64..1e3, 12)) {
        let m = DMatrix::from_row_slice(3, 4, &values);
        let (_, back) = round_trip(&m, |w, meta, v| write_real_matrix_csv(w, meta, v), |r| read_real_matrix_csv(r, 4));
        prop_assert_eq!(back, m);
    }

    #[test]
    fn chevron_round_trips(rows in 1usize..5, cols in 1usize..6, seed in any::<u64>()) {
        let population: Vec<Vec<f64>> =
            (0..rows).map(|i| (0..cols).map(|j| ((seed >> ((i * cols + j) % 60)) & 0xff) as f64 / 255.0).collect()).collect();
        let data = ChevronDataset {
            epsilon: 0.6,
            edge: 24.0,
            frequencies: (0..rows).map(|i| 88.0 + 0.25 * i as f64).collect(),
            durations: (0..cols).map(|j| 50.0 + 10.0 * j as f64).collect(),
            population,
            warnings: Vec::new(),
        };
        let (_, back) = round_trip(&data, |w, m, v| write_chevron_csv(w, m, v), |r| read_chevron_csv(r));
        prop_assert_eq!(back, data);
    }
}

#[test]
fn rb_dataset_round_trips() {
    let config = RbConfig { sequences_per_length: 3, ..Default::default() };
    let data = run_rb(&config, &ChannelSchedule::constant(&NativeChannels::ideal()).unwrap(), 4).unwrap();
    let (_, back) = round_trip(&data, |w, m, v| write_rb_csv(w, m, v), |r| read_rb_csv(r));
    assert_eq!(back, data);
}

#[test]
fn superoperators_and_ptms_round_trip() {
    let s = Superoperator::from_unitary(&paracz::dynamics::cz_unitary()).then(&Superoperator::depolarizing(4, 0.97));
    let mut buf = Vec::new();
    write_superoperator_csv(&mut buf, &meta(), &s).unwrap();
    let (_, back) = read_superoperator_csv(buf.as_slice()).unwrap();
    assert_eq!(back, s);
    let ptm = pauli_transfer_matrix(&s).unwrap();
    let (_, back) = round_trip(&ptm, |w, m, v| write_real_matrix_csv(w, m, v), |r| read_real_matrix_csv(r, 16));
    assert_eq!(back, ptm);
}

#[test]
fn complex_matrix_keeps_real_and_imaginary_parts() {
    let m = CMatrix::from_fn(2, 2, |i, j| Complex64::new(i as f64 - 0.5, j as f64 * 1e-17));
    let (_, back) = round_trip(&m, |w, meta, v| write_complex_matrix_csv(w, meta, v), |r| read_complex_matrix_csv(r, 2));
    assert_eq!(back, m);
}

#[test]
fn coherence_and_waveform_round_trip() {
    let rows = vec![
        CoherenceRow { epsilon: 0.0, t1: 20.0, t1_ci_low: 19.0, t1_ci_high: 21.0, t2_star: 15.0, t2_star_ci_low: 14.5, t2_star_ci_high: 15.5 },
        CoherenceRow { epsilon: 0.6, t1: 19.0, t1_ci_low: 18.0, t1_ci_high: 20.0, t2_star: 1e-3, t2_star_ci_low: f64::NAN, t2_star_ci_high: 2.0 },
    ];
    let mut buf = Vec::new();
    write_coherence_csv(&mut buf, &meta(), &rows).unwrap();
    let (_, back) = read_coherence_csv(buf.as_slice()).unwrap();
    assert_eq!(back[0], rows[0]);
    assert!(back[1].t2_star_ci_low.is_nan());

    let wf = FluxPulse::new(0.6, 88.5, 100.0, 24.0).synthesize(2.0).unwrap();
    let (m, back) = round_trip(&wf, |w, meta, v| write_waveform_csv(w, meta, v), |r| read_waveform_csv(r));
    assert_eq!(back, wf);
    assert_eq!(m.extra["sample_rate"], "2");
}

#[test]
fn json_envelope_round_trips() {
    let value = vec![1.5f64, -2.0];
    let mut buf = Vec::new();
    write_json(&mut buf, &meta(), &value).unwrap();
    let (m, back): (Metadata, Vec<f64>) = read_json(buf.as_slice()).unwrap();
    assert_eq!(back, value);
    assert_eq!(m, meta());
    assert!(buf.ends_with(b"\n"));
    assert!(read_json::<_, DecayFit>(buf.as_slice()).is_err());
}

#[test]
fn metadata_header_comes_first() {
    let mut buf = Vec::new();
    write_shift_csv(&mut buf, &meta(), &ShiftCurve { epsilon: vec![0.1], shift_mhz: vec![-3.0], sweet_spot: 0.6 }).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("# config_sha256: {}", config_hash(br#"{"seed": 5}"#)));
    assert_eq!(lines[1], "# seed: 5");
    assert_eq!(lines[2], "# version: 0.1.0");
    assert_eq!(lines[3], "# sweet_spot_epsilon: 0.6");
    assert_eq!(lines[4], "epsilon,shift_mhz");
    assert_eq!(lines[5], "0.1,-3");
}

#[test]
fn loaders_reject_foreign_files() {
    let mut buf = Vec::new();
    write_shift_csv(&mut buf, &meta(), &ShiftCurve { epsilon: vec![0.1], shift_mhz: vec![-3.0], sweet_spot: 0.6 }).unwrap();
    assert!(matches!(read_rb_csv(buf.as_slice()), Err(Error::Schema(_))));
    let text = "# seed: 1\ndecay,kind,length,sequence_index,successes,shots,slot\n0,reference,2,0,600,500,0\n";
    assert!(matches!(read_rb_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    let text = "# seed: 1\ndecay,kind,length,sequence_index,successes,shots,slot\n0,sideways,2,0,6,500,0\n";
    assert!(matches!(read_rb_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
}
