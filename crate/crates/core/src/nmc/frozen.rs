use serde::{Deserialize, Serialize};

use super::{nmc_pv_with, NMCResult, PvSettings};
use crate::error::{Error, Result};
use crate::geometry::{check_s, MetricField, RegionSpec};
use crate::heat::SolvePlan;
use crate::kernel::{kernel_l1_difference, measure_difference_integral, BudgetConstants, KernelModel};

/// H_s for a variable metric reduced to the frozen kernel K_y:
///
///   H = √|g(y)|·∫σK_y dx + ∫σ(K − K_y) dV + ∫σK_y(√|g(x)| − √|g(y)|) dx,
///
/// so |H − full_estimate| ≤ gap with gap = kernel_gap + measure_gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenNmc {
    /// √|g(y)|·frozen_value.
    pub full_estimate: f64,
    /// p.v.∫σK_y dx (Lebesgue measure).
    pub frozen_value: f64,
    pub gap: f64,
    /// sup√|g| · ∫|K − K_y| dx (certified L¹ bound).
    pub kernel_gap: f64,
    /// ∫K_y|√|g(x)| − √|g(y)|| dx.
    pub measure_gap: f64,
    pub frozen: NMCResult,
}

#[allow(clippy::too_many_arguments)]
pub fn frozen_coefficient_nmc(
    region: &RegionSpec,
    y: &[f64],
    metric: &MetricField,
    s: f64,
    r: f64,
    plan: &SolvePlan,
    constants: &BudgetConstants,
    settings: &PvSettings,
) -> Result<FrozenNmc> {
    check_s(s)?;
    let n = metric.dim();
    if region.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: region.dim(),
        });
    }
    let l1 = kernel_l1_difference(metric, y, r, s, plan, constants)?;
    let md = measure_difference_integral(metric, y, r, s)?;
    let gy = metric.eval(y);
    let density = gy.sqrt_det();
    let frozen = nmc_pv_with(region, y, &KernelModel::constant(gy, s)?, settings)?;
    let frozen_value = frozen.value / density;
    let lam_max = metric.ellipticity_bounds().map_or(2.0, |b| b.1);
    let kernel_gap = l1.value * lam_max.powf(n as f64 / 2.0);
    Ok(FrozenNmc {
        full_estimate: density * frozen_value,
        frozen_value,
        gap: kernel_gap + md.value,
        kernel_gap,
        measure_gap: md.value,
        frozen,
    })
}
