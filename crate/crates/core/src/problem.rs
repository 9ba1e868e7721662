//! Problem instances and evaluation of the min-SNR objective, the mixed
//! ℓ1,2 group norm and the group-sparse regularized objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::realcplx::{embed_quadratic, embed_vector, extract_complex, snr_form, ComplexVector};

/// Relative slack allowed on the power budget when checking feasibility.
pub const POWER_SLACK: f64 = 1e-9;

/// Default relative threshold below which an antenna group counts as off.
pub const DEFAULT_TAU_REL: f64 = 1e-3;

/// A single-group multicast instance: `M` users, `N` transmit antennas and a
/// sum-power budget.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    power: f64,
    noise_vars: Vec<f64>,
    channels: Vec<ComplexVector>,
    q_bar: Vec<DMatrix<f64>>,
}

impl ProblemInstance {
    /// Builds an instance and derives the embedded SNR forms
    /// `Q̄_m = embed(h_m h_m^H / σ_m²)`.
    pub fn new(channels: Vec<ComplexVector>, noise_vars: Vec<f64>, power: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Validation("instance needs at least one user".into()));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::Validation(format!("power must be positive, got {power}")));
        }
        check_dim("noise variances", channels.len(), noise_vars.len())?;
        if let Some(bad) = noise_vars.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Validation(format!("noise variance must be positive, got {bad}")));
        }
        let n = channels[0].len();
        if n == 0 {
            return Err(Error::Validation("instance needs at least one antenna".into()));
        }
        for h in &channels {
            check_dim("channel length", n, h.len())?;
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Validation("channel entries must be finite".into()));
            }
        }
        let q_bar = channels
            .iter()
            .zip(&noise_vars)
            .map(|(h, &s2)| embed_quadratic(&snr_form(h, s2)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            power,
            noise_vars,
            channels,
            q_bar,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.channels[0].len()
    }

    pub fn n_users(&self) -> usize {
        self.channels.len()
    }

    /// Real dimension `2N`.
    pub fn dim(&self) -> usize {
        2 * self.n_antennas()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn noise_vars(&self) -> &[f64] {
        &self.noise_vars
    }

    pub fn channels(&self) -> &[ComplexVector] {
        &self.channels
    }

    pub fn q_bar(&self) -> &[DMatrix<f64>] {
        &self.q_bar
    }

    /// `Q̃_m = -Q̄_m`.
    pub fn q_tilde(&self, m: usize) -> DMatrix<f64> {
        -&self.q_bar[m]
    }

    /// `w̄ᵀ Q̄_m w̄`, the linear SNR of user `m`.
    pub fn user_snr(&self, m: usize, w: &Beamformer) -> Result<f64> {
        check_dim("beamformer", self.dim(), w.len())?;
        Ok(quad_form(&self.q_bar[m], w.as_vector()))
    }

    /// Instance restricted to the given antennas (0-based, in the order given).
    pub fn restrict(&self, antennas: &[usize]) -> Result<Self> {
        let n = self.n_antennas();
        if antennas.is_empty() {
            return Err(Error::Validation("antenna subset is empty".into()));
        }
        if let Some(&bad) = antennas.iter().find(|&&a| a >= n) {
            return Err(Error::Validation(format!("antenna index {bad} out of range 0..{n}")));
        }
        let channels = self
            .channels
            .iter()
            .map(|h| DVector::from_iterator(antennas.len(), antennas.iter().map(|&a| h[a])))
            .collect();
        Self::new(channels, self.noise_vars.clone(), self.power)
    }
}

/// Real-embedded beamforming vector `w̄ = [Re w; Im w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer(DVector<f64>);

impl Beamformer {
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if !w.len().is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "beamformer must have even real length, got {}",
                w.len()
            )));
        }
        Ok(Self(w))
    }

    pub fn zeros(n_antennas: usize) -> Self {
        Self(DVector::zeros(2 * n_antennas))
    }

    pub fn from_complex(w: &ComplexVector) -> Self {
        Self(embed_vector(w))
    }

    pub fn to_complex(&self) -> ComplexVector {
        extract_complex(&self.0).expect("even length is an invariant")
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_antennas(&self) -> usize {
        self.0.len() / 2
    }

    pub fn power(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn is_feasible(&self, power: f64) -> bool {
        self.power() <= power * (1.0 + POWER_SLACK)
    }

    /// Embeds a beamformer defined on `support` (0-based antenna indices) into
    /// `n_antennas` dimensions, zero elsewhere.
    pub fn pad(&self, support: &[usize], n_antennas: usize) -> Result<Self> {
        check_dim("support", self.n_antennas(), support.len())?;
        let k = support.len();
        let mut out = DVector::zeros(2 * n_antennas);
        for (i, &a) in support.iter().enumerate() {
            if a >= n_antennas {
                return Err(Error::Validation(format!("antenna index {a} out of range")));
            }
            out[a] = self.0[i];
            out[a + n_antennas] = self.0[i + k];
        }
        Ok(Self(out))
    }
}

pub(crate) fn quad_form(q: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    w.dot(&(q * w))
}

/// Smallest user SNR `min_m w̄ᵀ Q̄_m w̄` (linear scale).
pub fn min_snr(inst: &ProblemInstance, w: &Beamformer) -> Result<f64> {
    check_dim("beamformer", inst.dim(), w.len())?;
    let worst = inst
        .q_bar
        .iter()
        .map(|q| quad_form(q, w.as_vector()))
        .fold(f64::INFINITY, f64::min);
    Ok(worst.max(0.0))
}

/// Euclidean norms of the antenna pairs `(w̄(j), w̄(j+N))`.
pub fn group_norms(w: &DVector<f64>) -> Result<Vec<f64>> {
    if !w.len().is_multiple_of(2) {
        return Err(Error::Validation(format!(
            "group norm needs an even-length vector, got {}",
            w.len()
        )));
    }
    let n = w.len() / 2;
    Ok((0..n).map(|j| w[j].hypot(w[j + n])).collect())
}

/// Mixed ℓ1,2 norm: the sum of the antenna pair norms.
pub fn group_l12_norm(w: &DVector<f64>) -> Result<f64> {
    Ok(group_norms(w)?.iter().sum())
}

/// `max_m w̄ᵀ Q̃_m w̄ + λ ‖w̄‖₁,₂`, the quantity the SCA loop decreases.
pub fn regularized_objective(inst: &ProblemInstance, w: &Beamformer, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Validation(format!("lambda must be nonnegative, got {lambda}")));
    }
    check_dim("beamformer", inst.dim(), w.len())?;
    let worst = inst
        .q_bar
        .iter()
        .map(|q| -quad_form(q, w.as_vector()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(worst + lambda * group_l12_norm(w.as_vector())?)
}

/// Antennas (0-based) whose pair norm exceeds `tau_rel` times the largest
/// pair norm. Empty for the zero vector.
pub fn group_support(w: &DVector<f64>, tau_rel: f64) -> Result<Vec<usize>> {
    let norms = group_norms(w)?;
    let max = norms.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let cut = tau_rel * max;
    Ok(norms
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > cut)
        .map(|(j, _)| j)
        .collect())
}

/// Indices of the `k` largest pair norms, ascending. Norms that agree to
/// about nine significant digits (relative to the largest) count as ties,
/// which go to the lower index.
pub fn top_groups(norms: &[f64], k: usize) -> Vec<usize> {
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let key: Vec<f64> = if max > 0.0 {
        norms.iter().map(|v| (v / max * 1e9).round()).collect()
    } else {
        norms.to_vec()
    };
    let mut idx: Vec<usize> = (0..norms.len()).collect();
    idx.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = idx.into_iter().take(k).collect();
    chosen.sort_unstable();
    chosen
}

/// `10·log10(x)`.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Snr {
    pub linear: f64,
    pub db: f64,
}

impl From<f64> for Snr {
    fn from(linear: f64) -> Self {
        Self {
            linear,
            db: to_db(linear),
        }
    }
}
