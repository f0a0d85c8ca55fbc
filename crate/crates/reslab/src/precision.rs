use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Arithmetic backing for a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecisionMode {
    /// Hardware doubles everywhere.
    Binary64,
    /// Exact big-integer/rational arithmetic rounded to the given width.
    Arbitrary { bits: u32 },
}

/// Requested accuracy for kernel and special-function evaluations.
///
/// Passed by value; operations are pure functions of (inputs, context).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionContext {
    pub mode: PrecisionMode,
    /// Relative error target in (0, 1).
    pub target_rel_err: f64,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self {
            mode: PrecisionMode::Binary64,
            target_rel_err: 1e-12,
        }
    }
}

impl PrecisionContext {
    pub fn binary64(target_rel_err: f64) -> Self {
        Self {
            mode: PrecisionMode::Binary64,
            target_rel_err,
        }
    }

    pub fn arbitrary(bits: u32, target_rel_err: f64) -> Self {
        Self {
            mode: PrecisionMode::Arbitrary { bits },
            target_rel_err,
        }
    }

    /// Invariants: arbitrary mode needs >= 64 bits; target in (0, 1).
    pub fn validate(&self) -> Result<()> {
        if let PrecisionMode::Arbitrary { bits } = self.mode {
            if bits < 64 {
                return Err(Error::PrecisionExhausted {
                    needed_bits: 64,
                    have_bits: bits as u64,
                });
            }
        }
        if !(self.target_rel_err > 0.0 && self.target_rel_err < 1.0) {
            return Err(Error::OffDomain {
                what: format!("target_rel_err = {} not in (0,1)", self.target_rel_err),
            });
        }
        Ok(())
    }

    pub fn bits(&self) -> u32 {
        match self.mode {
            PrecisionMode::Binary64 => 53,
            PrecisionMode::Arbitrary { bits } => bits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_narrow_arbitrary_mode() {
        assert!(PrecisionContext::arbitrary(32, 1e-10).validate().is_err());
        assert!(PrecisionContext::arbitrary(64, 1e-10).validate().is_ok());
    }

    #[test]
    fn validate_rejects_bad_target() {
        assert!(PrecisionContext::binary64(0.0).validate().is_err());
        assert!(PrecisionContext::binary64(1.0).validate().is_err());
        assert!(PrecisionContext::binary64(1e-9).validate().is_ok());
    }
}
