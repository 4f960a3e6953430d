use std::fmt;

use kdvlab::constraint::ConstraintError;
use kdvlab::energy::EnergyError;
use kdvlab::evolve::EvolveError;
use kdvlab::field::FieldError;
use kdvlab::scatter::ScatterError;
use kdvlab::sequences::SequenceError;
use kdvlab::soliton::SolitonError;
use serde_json::json;

/// Validation failures exit with 1, numerical failures with 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Numerical(_) => 2,
        }
    }

    pub fn to_json(&self) -> String {
        let (kind, message) = match self {
            Self::Validation(m) => ("validation", m),
            Self::Numerical(m) => ("numerical", m),
        };
        json!({ "error": kind, "code": self.exit_code(), "message": message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) | Self::Numerical(m) => f.write_str(m),
        }
    }
}

fn classified(numerical: bool, message: String) -> CliError {
    if numerical {
        CliError::Numerical(message)
    } else {
        CliError::Validation(message)
    }
}

fn field_is_numerical(e: &FieldError) -> bool {
    matches!(e, FieldError::NonFinite(_))
}

fn energy_is_numerical(e: &EnergyError) -> bool {
    match e {
        EnergyError::ReductionStalled(_) => true,
        EnergyError::Field(f) => field_is_numerical(f),
        _ => false,
    }
}

fn constraint_is_numerical(e: &ConstraintError) -> bool {
    matches!(e, ConstraintError::Diverged(_))
}

fn soliton_is_numerical(e: &SolitonError) -> bool {
    match e {
        SolitonError::Conditioning(_) => true,
        SolitonError::Field(f) => field_is_numerical(f),
        _ => false,
    }
}

fn scatter_is_numerical(e: &ScatterError) -> bool {
    match e {
        ScatterError::BracketFailed(_) => true,
        ScatterError::Field(f) => field_is_numerical(f),
        ScatterError::Energy(f) => energy_is_numerical(f),
        _ => false,
    }
}

fn evolve_is_numerical(e: &EvolveError) -> bool {
    match e {
        EvolveError::BlowUp(_) | EvolveError::NoConvergence => true,
        EvolveError::Field(f) => field_is_numerical(f),
        EvolveError::Soliton(f) => soliton_is_numerical(f),
        EvolveError::Energy(f) => energy_is_numerical(f),
        _ => false,
    }
}

fn sequence_is_numerical(e: &SequenceError) -> bool {
    match e {
        SequenceError::Constraint(f) => constraint_is_numerical(f),
        SequenceError::Field(f) => field_is_numerical(f),
        SequenceError::Soliton(f) => soliton_is_numerical(f),
        SequenceError::Scatter(f) => scatter_is_numerical(f),
        SequenceError::Energy(f) => energy_is_numerical(f),
        SequenceError::Evolve(f) => evolve_is_numerical(f),
        _ => false,
    }
}

macro_rules! classify_from {
    ($ty:ty, $pred:ident) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                classified($pred(&e), e.to_string())
            }
        }
    };
}

classify_from!(FieldError, field_is_numerical);
classify_from!(EnergyError, energy_is_numerical);
classify_from!(ConstraintError, constraint_is_numerical);
classify_from!(SolitonError, soliton_is_numerical);
classify_from!(ScatterError, scatter_is_numerical);
classify_from!(EvolveError, evolve_is_numerical);
classify_from!(SequenceError, sequence_is_numerical);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Validation(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Validation(format!("json: {e}"))
    }
}
