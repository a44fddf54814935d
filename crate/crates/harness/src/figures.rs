//! Bound curves and the threshold comparison as CSV.

use std::io::Write;

use serde::Serialize;

use delaychain::bounds::{corollary_bounds, figure1_dataset, unit_grid, Figure1Row, SecurityParams};

/// Grid steps of the threshold comparison (`fη = 0, 0.01, ..., 1`).
pub const FIGURE1_STEPS: usize = 100;

pub fn figure1_rows() -> Vec<Figure1Row> {
    figure1_dataset(&unit_grid(FIGURE1_STEPS))
}

/// Largest `|β_random_exp - β_const_4η|` over grid points with `fη < 0.2`.
pub fn small_f_eta_gap(rows: &[Figure1Row]) -> f64 {
    rows.iter()
        .filter(|r| r.f_eta < 0.2)
        .map(|r| (r.beta_random_exp - r.beta_const_4eta).abs())
        .fold(0.0, f64::max)
}

pub fn write_rows<T: Serialize>(rows: &[T], out: &mut (impl Write + ?Sized)) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Bounds at one confirmation depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundRow {
    pub k: u64,
    pub parties: usize,
    pub mu: f64,
    pub t: u64,
    pub p_settlement: f64,
    pub p_unheard: f64,
    pub settlement_raw: f64,
    pub settlement_clamped: f64,
    pub p_cq: f64,
    pub p_unheard_tilde: f64,
    pub cq_raw: f64,
    pub cq_clamped: f64,
    pub common_prefix_raw: f64,
    pub common_prefix_clamped: f64,
}

/// Bounds at `k = step, 2 step, ..., points · step`.
pub fn bound_curve(
    params: &SecurityParams,
    parties: usize,
    mu: f64,
    t: u64,
    step: u64,
    points: u64,
) -> Result<Vec<BoundRow>, delaychain::bounds::BoundsError> {
    (1..=points)
        .map(|j| {
            let k = j * step;
            let b = corollary_bounds(params, t, k, parties, mu)?;
            Ok(BoundRow {
                k,
                parties,
                mu,
                t,
                p_settlement: b.p_settlement,
                p_unheard: b.p_unheard,
                settlement_raw: b.settlement_total.raw,
                settlement_clamped: b.settlement_total.clamped,
                p_cq: b.p_cq,
                p_unheard_tilde: b.p_unheard_tilde,
                cq_raw: b.cq_total.raw,
                cq_clamped: b.cq_total.clamped,
                common_prefix_raw: b.common_prefix_total.raw,
                common_prefix_clamped: b.common_prefix_total.clamped,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ends() {
        let rows = figure1_rows();
        assert_eq!(rows.len(), 101);
        assert_eq!(rows[0].beta_random_exp, 0.5);
        assert_eq!(rows[100].beta_random_exp, 0.0);
    }
}
