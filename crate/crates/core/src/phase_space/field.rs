use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::ModelParams;

/// Which diagonal propagator a field samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    WignerDiagonal,
    LiouvilleDiagonal,
}

impl FieldKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            FieldKind::WignerDiagonal => 0,
            FieldKind::LiouvilleDiagonal => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(FieldKind::WignerDiagonal),
            1 => Some(FieldKind::LiouvilleDiagonal),
            _ => None,
        }
    }
}

/// Rectangular region `[q_min, q_max) x [p_min, p_max)` of phase space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseWindow {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl PhaseWindow {
    pub fn new(q_min: f64, q_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let w = Self {
            q_min,
            q_max,
            p_min,
            p_max,
        };
        w.validate()?;
        Ok(w)
    }

    /// `|q| <= 1.5 q_well`, `|p| <= sqrt(2 m 2 E_b)`.
    pub fn default_for(p: &ModelParams) -> Self {
        let q = 1.5 * p.well_position();
        let pm = (4.0 * p.mass * p.barrier_height).sqrt();
        Self {
            q_min: -q,
            q_max: q,
            p_min: -pm,
            p_max: pm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64, b: f64| a.is_finite() && b.is_finite() && b > a;
        if !ok(self.q_min, self.q_max) {
            return Err(invalid("window.q", "need finite q_max > q_min"));
        }
        if !ok(self.p_min, self.p_max) {
            return Err(invalid("window.p", "need finite p_max > p_min"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.q_max - self.q_min) * (self.p_max - self.p_min)
    }

    pub fn contains(&self, q: f64, p: f64) -> bool {
        (self.q_min..self.q_max).contains(&q) && (self.p_min..self.p_max).contains(&p)
    }
}

fn check_resolution(resolution: (usize, usize)) -> Result<()> {
    if resolution.0 < 2 || resolution.1 < 2 {
        return Err(invalid("resolution", "need at least 2 cells per axis"));
    }
    Ok(())
}

/// Values on a regular raster of phase-space cells.
///
/// `q_axis` and `p_axis` hold cell centres; `values[iq * p_axis.len() + ip]`
/// is the cell value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceField {
    pub q_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<f64>,
    pub time: f64,
    pub kind: FieldKind,
}

impl PhaseSpaceField {
    pub(crate) fn zeros(window: &PhaseWindow, resolution: (usize, usize), time: f64, kind: FieldKind) -> Result<Self> {
        window.validate()?;
        check_resolution(resolution)?;
        let (nq, np) = resolution;
        let dq = (window.q_max - window.q_min) / nq as f64;
        let dp = (window.p_max - window.p_min) / np as f64;
        Ok(Self {
            q_axis: (0..nq).map(|i| window.q_min + (i as f64 + 0.5) * dq).collect(),
            p_axis: (0..np).map(|j| window.p_min + (j as f64 + 0.5) * dp).collect(),
            values: vec![0.0; nq * np],
            time,
            kind,
        })
    }

    pub fn nq(&self) -> usize {
        self.q_axis.len()
    }

    pub fn np(&self) -> usize {
        self.p_axis.len()
    }

    pub fn dq(&self) -> f64 {
        self.q_axis[1] - self.q_axis[0]
    }

    pub fn dp(&self) -> f64 {
        self.p_axis[1] - self.p_axis[0]
    }

    pub fn cell_area(&self) -> f64 {
        self.dq() * self.dp()
    }

    pub fn window(&self) -> PhaseWindow {
        let (dq, dp) = (self.dq(), self.dp());
        PhaseWindow {
            q_min: self.q_axis[0] - 0.5 * dq,
            q_max: self.q_axis[self.nq() - 1] + 0.5 * dq,
            p_min: self.p_axis[0] - 0.5 * dp,
            p_max: self.p_axis[self.np() - 1] + 0.5 * dp,
        }
    }

    pub fn get(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.np() + ip]
    }

    /// Cell containing `(q, p)`, if inside the window.
    pub fn cell_of(&self, q: f64, p: f64) -> Option<(usize, usize)> {
        let w = self.window();
        if !w.contains(q, p) {
            return None;
        }
        let iq = ((q - w.q_min) / self.dq()).floor() as usize;
        let ip = ((p - w.p_min) / self.dp()).floor() as usize;
        Some((iq.min(self.nq() - 1), ip.min(self.np() - 1)))
    }

    /// `sum(values) * cell_area`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cells strictly greater than their eight neighbours and above
    /// `floor`; border cells are never counted.
    pub fn local_maxima(&self, floor: f64) -> Vec<(usize, usize)> {
        let (nq, np) = (self.nq(), self.np());
        let mut out = Vec::new();
        for iq in 1..nq.saturating_sub(1) {
            for ip in 1..np.saturating_sub(1) {
                let v = self.get(iq, ip);
                if v <= floor {
                    continue;
                }
                let is_max = (iq - 1..=iq + 1)
                    .flat_map(|a| (ip - 1..=ip + 1).map(move |b| (a, b)))
                    .filter(|&c| c != (iq, ip))
                    .all(|(a, b)| self.get(a, b) < v);
                if is_max {
                    out.push((iq, ip));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[1] > w[0]);
        if !increasing(&self.q_axis) || !increasing(&self.p_axis) {
            return Err(invalid("field.axes", "axes must be strictly increasing with >= 2 cells"));
        }
        if self.values.len() != self.nq() * self.np() {
            return Err(invalid("field.values", "length must equal nq * np"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field.values", "values must be finite"));
        }
        Ok(())
    }
}
