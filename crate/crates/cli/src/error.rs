use thiserror::Error;

use crate::expr::ExprError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_FILE: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Core(#[from] adgraph::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// Process exit status: 2 for bad invocations, 3 for unparseable
    /// expressions or grammars, 4 for evaluation and data errors, 5 for
    /// unreadable or unwritable files.
    pub fn exit_code(&self) -> i32 {
        use adgraph::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Expr(_) => EXIT_PARSE,
            CliError::Io { .. } => EXIT_FILE,
            CliError::Core(e) => match e {
                E::SyntaxError { .. }
                | E::NotCnf { .. }
                | E::InvalidProbability { .. }
                | E::UndefinedNonterminal(_)
                | E::NotNormalized { .. }
                | E::EmptyGrammar => EXIT_PARSE,
                E::EmptyInputName
                | E::DuplicateInputName(_)
                | E::MissingInput(_)
                | E::NotAnInput(_)
                | E::NoTerms => EXIT_USAGE,
                _ => EXIT_DOMAIN,
            },
        }
    }
}
