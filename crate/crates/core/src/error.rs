use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embed::EmbedError;
use crate::lexer::LexError;
use crate::nn::NnError;
use crate::svg::SvgError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error family, mapped one-to-one onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    Io,
    Format,
    Config,
    Numeric,
}

impl ErrorFamily {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorFamily::Io => 2,
            ErrorFamily::Format => 3,
            ErrorFamily::Config => 4,
            ErrorFamily::Numeric => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Svg(#[from] SvgError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn family(&self) -> ErrorFamily {
        match self {
            // An empty function is reported like an unreadable input.
            Error::Lex(LexError::EmptyInput) => ErrorFamily::Io,
            Error::Lex(LexError::OversizeInput { .. }) => ErrorFamily::Config,
            Error::Svg(SvgError::NonSymmetricInput) => ErrorFamily::Format,
            Error::Embed(e) => match e {
                EmbedError::DimensionTooSmall(_) => ErrorFamily::Config,
                EmbedError::EmptyTokenList => ErrorFamily::Io,
                EmbedError::Import(_) | EmbedError::MissingKey(_) => ErrorFamily::Format,
                EmbedError::Io(_) => ErrorFamily::Io,
            },
            Error::Nn(e) => match e {
                NnError::ShapeMismatch(_) | NnError::InvalidConfig(_) => ErrorFamily::Config,
                NnError::InvalidDistribution(_) | NnError::NonFiniteGradient(_) => {
                    ErrorFamily::Numeric
                }
                NnError::Checkpoint(_) => ErrorFamily::Format,
            },
            Error::Corpus(e) => match e {
                CorpusError::FileUnreadable { .. } => ErrorFamily::Io,
                CorpusError::AllLinesRejected { .. } => ErrorFamily::Format,
                CorpusError::TooFewSamples(_)
                | CorpusError::RatioOutOfRange(_)
                | CorpusError::TooManyCweClasses { .. } => ErrorFamily::Config,
            },
            Error::Io { .. } => ErrorFamily::Io,
            Error::Format(_) => ErrorFamily::Format,
            Error::Config(_) => ErrorFamily::Config,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.family().exit_code()
    }
}
