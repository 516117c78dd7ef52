use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::vmd::VmdResult;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    SignalPart,
    FeaturePart,
    #[serde(rename = "dc")]
    DC,
    Special,
}

/// What `reconstruct` may pick: a mode label or the per-side residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    SignalPart,
    FeaturePart,
    #[serde(rename = "dc")]
    DC,
    Special,
    Residual,
}

impl From<ModeLabel> for Component {
    fn from(l: ModeLabel) -> Self {
        match l {
            ModeLabel::SignalPart => Component::SignalPart,
            ModeLabel::FeaturePart => Component::FeaturePart,
            ModeLabel::DC => Component::DC,
            ModeLabel::Special => Component::Special,
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "signal" | "signal_part" => Component::SignalPart,
            "feature" | "feature_part" => Component::FeaturePart,
            "dc" => Component::DC,
            "special" => Component::Special,
            "residual" => Component::Residual,
            other => return Err(Error::param(format!("unknown component '{other}'"))),
        })
    }
}

pub type Selection = BTreeSet<Component>;

/// Comma-separated components, e.g. `signal,dc`; `all` selects everything.
pub fn parse_selection(s: &str) -> Result<Selection> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(full_selection());
    }
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Every component, residuals included.
pub fn full_selection() -> Selection {
    [
        Component::SignalPart,
        Component::FeaturePart,
        Component::DC,
        Component::Special,
        Component::Residual,
    ]
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcPolicy {
    /// DC modes are labeled `SignalPart`.
    #[default]
    MergeIntoSignal,
    /// DC modes are labeled `DC` and restored alongside the signal part.
    Separate,
    /// DC modes are labeled `DC` and left out of the restored signal.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionPolicy {
    /// Per side.
    pub n_signal_modes: usize,
    pub dc_policy: DcPolicy,
    /// `(ω_lo, ω_hi]` in rad/sample.
    pub special_window: (f64, f64),
    /// Fraction of the side's mode energy.
    pub special_energy_min: f64,
}

impl Default for PartitionPolicy {
    fn default() -> Self {
        Self {
            n_signal_modes: 1,
            dc_policy: DcPolicy::MergeIntoSignal,
            special_window: (0.9 * PI, PI),
            special_energy_min: 0.05,
        }
    }
}

impl PartitionPolicy {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.special_window;
        if !(0.0 <= lo && lo < hi && hi <= PI) {
            return Err(Error::param(format!(
                "special window ({lo}, {hi}] must satisfy 0 <= lo < hi <= pi"
            )));
        }
        if !(0.0..=1.0).contains(&self.special_energy_min) {
            return Err(Error::param(format!(
                "special_energy_min must lie in [0, 1], got {}",
                self.special_energy_min
            )));
        }
        Ok(())
    }

    /// Components making up the restored transmitted signal.
    pub fn restoration_selection(&self) -> Selection {
        let mut s = Selection::new();
        s.insert(Component::SignalPart);
        if self.dc_policy == DcPolicy::Separate {
            s.insert(Component::DC);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub pos: Vec<ModeLabel>,
    pub neg: Vec<ModeLabel>,
}

/// Labels one side from its centre frequencies and mode energies.
///
/// `dc_locked` marks mode 0 as pinned at DC; any mode below `grid_step` is
/// treated as DC too.
pub fn partition_side(
    omegas: &[f64],
    energies: &[f64],
    dc_locked: bool,
    grid_step: f64,
    policy: &PartitionPolicy,
) -> Result<Vec<ModeLabel>> {
    policy.validate()?;
    let k = omegas.len();
    if k == 0 {
        return Err(Error::param("cannot partition an empty mode set"));
    }
    if energies.len() != k {
        return Err(Error::param(format!("{} energies for {k} modes", energies.len())));
    }
    if policy.n_signal_modes > k {
        return Err(Error::param(format!(
            "n_signal_modes = {} exceeds the {k} available modes",
            policy.n_signal_modes
        )));
    }
    let total: f64 = energies.iter().sum();
    let (lo, hi) = policy.special_window;
    let mut labels: Vec<Option<ModeLabel>> = vec![None; k];

    for i in 0..k {
        if (dc_locked && i == 0) || omegas[i] < grid_step {
            labels[i] = Some(match policy.dc_policy {
                DcPolicy::MergeIntoSignal => ModeLabel::SignalPart,
                DcPolicy::Separate | DcPolicy::Drop => ModeLabel::DC,
            });
        }
    }
    for i in 0..k {
        let fraction = if total > 0.0 { energies[i] / total } else { 0.0 };
        if labels[i].is_none() && omegas[i] > lo && omegas[i] <= hi && fraction >= policy.special_energy_min {
            labels[i] = Some(ModeLabel::Special);
        }
    }
    let mut rest: Vec<usize> = (0..k).filter(|&i| labels[i].is_none()).collect();
    // Stable sort keeps lower indices first among equal energies.
    rest.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]));
    for (rank, &i) in rest.iter().enumerate() {
        labels[i] = Some(if rank < policy.n_signal_modes {
            ModeLabel::SignalPart
        } else {
            ModeLabel::FeaturePart
        });
    }
    Ok(labels.into_iter().map(|l| l.expect("every mode labeled")).collect())
}

fn side_labels(r: &VmdResult, policy: &PartitionPolicy) -> Result<Vec<ModeLabel>> {
    let energies: Vec<f64> = (0..r.mode_set.k()).map(|i| r.mode_energy(i)).collect();
    partition_side(
        &r.mode_set.omegas,
        &energies,
        r.mode_set.dc_locked,
        r.mode_set.grid_step(),
        policy,
    )
}

pub fn partition_modes(pos: &VmdResult, neg: &VmdResult, policy: &PartitionPolicy) -> Result<Labels> {
    Ok(Labels {
        pos: side_labels(pos, policy)?,
        neg: side_labels(neg, policy)?,
    })
}
