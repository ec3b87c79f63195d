use thiserror::Error;

/// Errors raised by the analytic chain and the Monte Carlo oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} outside its domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("queue is unstable: rho_s = {rho_s}, rho_o = {rho_o} (need rho_s + rho_o < 1)")]
    Unstable { rho_s: f64, rho_o: f64 },

    #[error("no feasible equilibrium in ({lo}, {hi}]: h(lo) = {h_lo:e}, h(hi) = {h_hi:e}")]
    Infeasible { lo: f64, hi: f64, h_lo: f64, h_hi: f64 },

    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Laplace inversion unstable at t = {t}: raw value {value}")]
    Inversion { t: f64, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_domain(what: &'static str, value: f64, ok: bool) -> Result<f64> {
    if ok && !value.is_nan() {
        Ok(value)
    } else {
        Err(Error::Domain { what, value })
    }
}
