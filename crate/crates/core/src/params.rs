use crate::error::{Result, VfdError};
use crate::scalar::Real;

/// Run parameters shared by the Eulerian and Lagrangian solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params<T> {
    /// Exponent `r > 1`.
    pub r: T,
    pub dt: T,
    pub t_end: T,
    /// Newton stops once the residual sup-norm drops below this.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    /// Steps between stored snapshots and diagnostics rows.
    pub output_every: usize,
}

impl<T: Real> Params<T> {
    pub fn new(r: T, dt: T, t_end: T) -> Self {
        Self {
            r,
            dt,
            t_end,
            newton_tol: T::lit(1e-11).max(T::epsilon() * T::lit(1e3)),
            newton_max_iter: 50,
            output_every: 1,
        }
    }

    pub fn with_output_every(mut self, every: usize) -> Self {
        self.output_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(VfdError::InvalidParams(msg.to_string()));
        if !(self.r > T::one()) || !self.r.is_finite() {
            return bad("r must be > 1");
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return bad("dt must be > 0");
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            return bad("t_end must be >= 0");
        }
        if !(self.newton_tol > T::zero()) {
            return bad("newton tolerance must be > 0");
        }
        if self.newton_max_iter == 0 {
            return bad("newton max_iter must be >= 1");
        }
        if self.output_every == 0 {
            return bad("output_every must be >= 1");
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_end` with step `dt`.
    pub fn step_count(&self) -> usize {
        let steps = (self.t_end / self.dt - T::lit(1e-9)).ceil();
        steps.max(T::zero()).to_usize().unwrap_or(0)
    }
}
