//! Detection statistics and the threshold decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::averaging::Statistic;
use crate::error::{Error, Result};
use crate::linalg::HpdMatrix;
use crate::metric::{distance, MetricKind};
use crate::signal::{CVector, Hypothesis, Snapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DetectorSpec {
    Amf,
    Anmf,
    /// Threshold on d(R_g, R_CUT) with R_g the mean/median of the secondary
    /// Toeplitz autocovariances.
    MatrixCfar(MetricKind, Statistic),
    /// AMF with the SCM replaced by R_g.
    GeometricAmf(MetricKind, Statistic),
}

impl DetectorSpec {
    /// AMF, ANMF and matrix-CFAR over the three Riemannian metrics, mean and median.
    pub fn standard_set() -> Vec<DetectorSpec> {
        let mut out = vec![DetectorSpec::Amf, DetectorSpec::Anmf];
        for kind in MetricKind::RIEMANNIAN {
            for stat in Statistic::ALL {
                out.push(DetectorSpec::MatrixCfar(kind, stat));
            }
        }
        out
    }

    /// SCM-based AMF against AMFs built on every Riemannian mean and median.
    pub fn geometric_amf_set() -> Vec<DetectorSpec> {
        let mut out = vec![DetectorSpec::Amf];
        for kind in MetricKind::RIEMANNIAN {
            for stat in Statistic::ALL {
                out.push(DetectorSpec::GeometricAmf(kind, stat));
            }
        }
        out
    }

    /// Family label used in CSV output.
    pub fn family(&self) -> &'static str {
        match self {
            DetectorSpec::Amf => "amf",
            DetectorSpec::Anmf => "anmf",
            DetectorSpec::MatrixCfar(..) => "mcfar",
            DetectorSpec::GeometricAmf(..) => "gamf",
        }
    }

    /// Averaging needed for R_g, if any.
    pub fn averaging(&self) -> Option<(MetricKind, Statistic)> {
        match *self {
            DetectorSpec::MatrixCfar(k, s) | DetectorSpec::GeometricAmf(k, s) => Some((k, s)),
            _ => None,
        }
    }

    /// Whether the statistic depends on the assumed target signature.
    pub fn uses_steering(&self) -> bool {
        !matches!(self, DetectorSpec::MatrixCfar(..))
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.averaging() {
            None => f.write_str(self.family()),
            Some((k, s)) => write!(f, "{}-{}-{}", self.family(), k.name(), s.name()),
        }
    }
}

impl FromStr for DetectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let parts: Vec<&str> = lower.split('-').collect();
        match parts.as_slice() {
            ["amf"] => Ok(DetectorSpec::Amf),
            ["anmf"] => Ok(DetectorSpec::Anmf),
            [family @ ("mcfar" | "gamf"), kind, stat] => {
                let kind: MetricKind = kind.parse()?;
                let stat: Statistic = stat.parse()?;
                Ok(if *family == "mcfar" {
                    DetectorSpec::MatrixCfar(kind, stat)
                } else {
                    DetectorSpec::GeometricAmf(kind, stat)
                })
            }
            _ => Err(Error::invalid(format!(
                "unknown detector '{s}' (expected amf, anmf, mcfar-<metric>-<mean|median> or gamf-<metric>-<mean|median>)"
            ))),
        }
    }
}

impl TryFrom<String> for DetectorSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DetectorSpec> for String {
    fn from(d: DetectorSpec) -> String {
        d.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionStatistic {
    pub value: f64,
    pub detector: DetectorSpec,
}

/// `R^{-1/2}`-whitening in the eigenbasis of an HPD estimate; one factorisation
/// serves any number of quadratic forms.
#[derive(Clone, Debug)]
pub struct Whitener {
    /// Rows of `Λ^{-1/2} Uᴴ`.
    map: crate::linalg::CMatrix,
}

impl Whitener {
    pub fn new(r: &HpdMatrix) -> Self {
        let eig = r.eigen();
        let mut map = eig.unitary.adjoint();
        for (i, l) in eig.eigenvalues.iter().enumerate() {
            map.row_mut(i).scale_mut(1.0 / l.sqrt());
        }
        Self { map }
    }

    pub fn dim(&self) -> usize {
        self.map.nrows()
    }

    pub fn apply(&self, x: &Snapshot) -> Result<CVector> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "snapshot has length {} but the covariance is {}×{}",
                x.len(),
                self.dim(),
                self.dim()
            )));
        }
        Ok(&self.map * x.values())
    }
}

/// AMF from whitened data and signature.
pub fn amf_whitened(wx: &CVector, ws: &CVector) -> f64 {
    wx.dotc(ws).norm_sqr() / ws.norm_squared()
}

/// ANMF from whitened data and signature; NaN when `wx` is zero.
pub fn anmf_whitened(wx: &CVector, ws: &CVector) -> f64 {
    (wx.dotc(ws).norm_sqr() / (wx.norm_squared() * ws.norm_squared())).min(1.0)
}

/// `|xᴴR⁻¹s|² / (sᴴR⁻¹s)`.
pub fn amf_stat(x: &Snapshot, s: &Snapshot, rhat: &HpdMatrix) -> Result<f64> {
    let w = Whitener::new(rhat);
    Ok(amf_whitened(&w.apply(x)?, &w.apply(s)?))
}

/// `|xᴴR⁻¹s|² / ((xᴴR⁻¹x)(sᴴR⁻¹s))`, in [0, 1].
pub fn anmf_stat(x: &Snapshot, s: &Snapshot, rhat: &HpdMatrix) -> Result<f64> {
    if x.norm() == 0.0 {
        return Err(Error::invalid("ANMF is undefined for a zero snapshot"));
    }
    let w = Whitener::new(rhat);
    Ok(anmf_whitened(&w.apply(x)?, &w.apply(s)?))
}

/// `d(R_g, R_CUT)` under `kind`.
pub fn matrix_cfar_stat(rg: &HpdMatrix, rcut: &HpdMatrix, kind: MetricKind) -> Result<f64> {
    distance(kind, rg, rcut)
}

pub fn geometric_amf_stat(x: &Snapshot, s: &Snapshot, rg: &HpdMatrix) -> Result<f64> {
    amf_stat(x, s, rg)
}

/// H1 iff the statistic strictly exceeds γ.
pub fn decide(stat: &DetectionStatistic, gamma: f64) -> Hypothesis {
    if stat.value > gamma {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}
