//! Successive-halving brackets.

use serde::{Deserialize, Serialize};

use super::ExplorerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub n_configs: usize,
    pub resource: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub s: usize,
    pub rungs: Vec<Rung>,
}

/// Brackets `s = s_max, ..., 0` for maximum resource `max_resource` and reduction factor `eta`.
pub fn hyperband_schedule(max_resource: f64, eta: usize) -> Result<Vec<Bracket>, ExplorerError> {
    if eta < 2 {
        return Err(ExplorerError::BadSetting("hyperband eta must be >= 2".into()));
    }
    if !(max_resource >= eta as f64) {
        return Err(ExplorerError::BadSetting("hyperband max resource must be >= eta".into()));
    }
    let eta_u = eta as u128;
    let mut s_max = 0u32;
    while (eta as f64).powi(s_max as i32 + 1) <= max_resource * (1.0 + 1e-12) {
        s_max += 1;
    }
    let mut brackets = Vec::with_capacity(s_max as usize + 1);
    for s in (0..=s_max).rev() {
        let pow = eta_u.pow(s);
        // ceil((s_max + 1) / (s + 1) * eta^s) in integer arithmetic
        let num = (s_max as u128 + 1) * pow;
        let den = s as u128 + 1;
        let mut n = num.div_ceil(den) as usize;
        let mut rungs = Vec::with_capacity(s as usize + 1);
        for i in 0..=s {
            let resource = max_resource / (eta as f64).powi((s - i) as i32);
            rungs.push(Rung { n_configs: n, resource });
            n /= eta;
        }
        brackets.push(Bracket { s: s as usize, rungs });
    }
    Ok(brackets)
}
