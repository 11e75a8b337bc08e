use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{context}")]
    Core {
        context: String,
        #[source]
        source: paracz::Error,
    },
    #[error("cannot write {path}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn core(context: impl Into<String>) -> impl FnOnce(paracz::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Core { context, source }
    }

    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use paracz::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source {
                E::InvalidInput(_) | E::InvalidPulse(_) | E::Schema(_) | E::Json(_) | E::Parse { .. } | E::Io(_) => 2,
                _ => 3,
            },
            CliError::Output { .. } => 1,
        }
    }
}
