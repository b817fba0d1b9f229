//! Comparison summary over a results table.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{invalid, Result};

use super::ResultRow;

/// Published reference values (views, mode, method, RMSE, SSIM) for the
/// OS-SART and ADSIR cells, used as literature context only.
pub fn published_results() -> Vec<ResultRow> {
    const CELLS: [(usize, &str, &str, f64, f64); 12] = [
        (69, "ES", "OS-SART", 615.0, 0.9923),
        (69, "ES", "ADSIR", 386.8, 0.9962),
        (69, "EA", "OS-SART", 608.6, 0.9923),
        (69, "EA", "ADSIR", 388.3, 0.9960),
        (55, "ES", "OS-SART", 819.9, 0.9883),
        (55, "ES", "ADSIR", 395.5, 0.9960),
        (55, "EA", "OS-SART", 833.8, 0.9878),
        (55, "EA", "ADSIR", 399.9, 0.9960),
        (31, "ES", "OS-SART", 1719.4, 0.9627),
        (31, "ES", "ADSIR", 550.8, 0.9936),
        (31, "EA", "OS-SART", 1716.2, 0.9629),
        (31, "EA", "ADSIR", 564.9, 0.9935),
    ];
    CELLS
        .iter()
        .map(|&(views, mode, method, rmse, ssim)| ResultRow {
            views,
            mode: mode.to_string(),
            method: method.to_string(),
            rmse,
            ssim,
            seconds: 0.0,
        })
        .collect()
}

/// Published EST (equally-sloped Fourier method) results: (views, RMSE, SSIM).
/// Reported for context; that method is not implemented here.
pub fn literature_est_rmse() -> [(usize, f64, f64); 3] {
    [(69, 749.8, 0.9935), (55, 966.8, 0.9905), (31, 1840.4, 0.9694)]
}

/// Methods for one (views, mode) pair, best RMSE first.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub views: usize,
    pub mode: String,
    pub order: Vec<(String, f64)>,
}

/// ADSIR / OS-SART ratios for one (views, mode) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRatio {
    pub views: usize,
    pub mode: String,
    pub rmse_ratio: f64,
    pub adsir_ssim: f64,
    pub sart_ssim: f64,
}

/// |RMSE_ES − RMSE_EA| / RMSE_EA for one (views, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGap {
    pub views: usize,
    pub method: String,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rankings: Vec<Ranking>,
    pub ratios: Vec<CellRatio>,
    pub mode_gaps: Vec<ModeGap>,
    /// Relative RMSE growth from the most to the fewest views, per (method, mode).
    pub degradation: Vec<(String, String, f64)>,
    /// ADSIR has lower RMSE and higher SSIM than OS-SART in every cell.
    pub adsir_wins_everywhere: Option<bool>,
    /// ADSIR / OS-SART RMSE ratio at the fewest views is at most 0.8 in every mode.
    pub strong_gain_at_fewest_views: Option<bool>,
    /// ADSIR degrades less than OS-SART from most to fewest views in every mode.
    pub adsir_more_robust: Option<bool>,
    /// Every ES-vs-EA relative RMSE difference is at most 10 %.
    pub modes_equivalent: Option<bool>,
}

const ADSIR: &str = "ADSIR";
const SART: &str = "OS-SART";

fn all(flags: impl IntoIterator<Item = bool>) -> Option<bool> {
    let mut any = false;
    let mut ok = true;
    for f in flags {
        any = true;
        ok &= f;
    }
    any.then_some(ok)
}

pub fn report(rows: &[ResultRow]) -> Result<Report> {
    if rows.is_empty() {
        return Err(invalid("no results to report"));
    }
    let mut cells: BTreeMap<(usize, String, String), &ResultRow> = BTreeMap::new();
    for r in rows {
        cells.insert((r.views, r.mode.clone(), r.method.clone()), r);
    }
    let get = |v: usize, mode: &str, method: &str| cells.get(&(v, mode.to_string(), method.to_string())).copied();

    let mut views: Vec<usize> = rows.iter().map(|r| r.views).collect();
    views.sort_unstable_by(|a, b| b.cmp(a));
    views.dedup();
    let mut modes: Vec<String> = rows.iter().map(|r| r.mode.clone()).collect();
    modes.sort();
    modes.dedup();
    let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();

    let mut rankings = Vec::new();
    let mut ratios = Vec::new();
    for &v in &views {
        for mode in &modes {
            let mut order: Vec<(String, f64)> = methods
                .iter()
                .filter_map(|m| get(v, mode, m).map(|r| (m.clone(), r.rmse)))
                .collect();
            if order.is_empty() {
                continue;
            }
            order.sort_by(|a, b| a.1.total_cmp(&b.1));
            rankings.push(Ranking {
                views: v,
                mode: mode.clone(),
                order,
            });
            if let (Some(a), Some(s)) = (get(v, mode, ADSIR), get(v, mode, SART)) {
                ratios.push(CellRatio {
                    views: v,
                    mode: mode.clone(),
                    rmse_ratio: a.rmse / s.rmse,
                    adsir_ssim: a.ssim,
                    sart_ssim: s.ssim,
                });
            }
        }
    }

    let mut mode_gaps = Vec::new();
    for &v in &views {
        for m in &methods {
            if let (Some(es), Some(ea)) = (get(v, "ES", m), get(v, "EA", m)) {
                mode_gaps.push(ModeGap {
                    views: v,
                    method: m.clone(),
                    relative_difference: (es.rmse - ea.rmse).abs() / ea.rmse,
                });
            }
        }
    }

    let mut degradation = Vec::new();
    if views.len() >= 2 {
        let (most, fewest) = (views[0], views[views.len() - 1]);
        for m in &methods {
            for mode in &modes {
                if let (Some(hi), Some(lo)) = (get(most, mode, m), get(fewest, mode, m)) {
                    degradation.push((m.clone(), mode.clone(), (lo.rmse - hi.rmse) / hi.rmse));
                }
            }
        }
    }

    let fewest = views[views.len() - 1];
    let adsir_wins_everywhere = all(ratios.iter().map(|c| c.rmse_ratio < 1.0 && c.adsir_ssim > c.sart_ssim));
    let strong_gain_at_fewest_views = all(ratios.iter().filter(|c| c.views == fewest).map(|c| c.rmse_ratio <= 0.8));
    let adsir_more_robust = all(modes.iter().filter_map(|mode| {
        let find = |method: &str| {
            degradation
                .iter()
                .find(|(m, md, _)| m == method && md == mode)
                .map(|d| d.2)
        };
        Some(find(ADSIR)? < find(SART)?)
    }));
    let modes_equivalent = all(mode_gaps.iter().map(|g| g.relative_difference <= 0.10));

    Ok(Report {
        rankings,
        ratios,
        mode_gaps,
        degradation,
        adsir_wins_everywhere,
        strong_gain_at_fewest_views,
        adsir_more_robust,
        modes_equivalent,
    })
}

fn flag(f: Option<bool>) -> &'static str {
    match f {
        Some(true) => "holds",
        Some(false) => "does NOT hold",
        None => "not assessable",
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Method ranking by RMSE (best first)")?;
        for r in &self.rankings {
            let order: Vec<String> = r.order.iter().map(|(m, e)| format!("{m} {e:.1}")).collect();
            writeln!(f, "  {:>3} views {}: {}", r.views, r.mode, order.join(" < "))?;
        }
        if !self.ratios.is_empty() {
            writeln!(f, "\nADSIR / OS-SART")?;
            for c in &self.ratios {
                writeln!(
                    f,
                    "  {:>3} views {}: RMSE ratio {:.3}, SSIM {:.4} vs {:.4}",
                    c.views, c.mode, c.rmse_ratio, c.adsir_ssim, c.sart_ssim
                )?;
            }
        }
        if !self.mode_gaps.is_empty() {
            writeln!(f, "\nES vs EA relative RMSE difference")?;
            for g in &self.mode_gaps {
                writeln!(
                    f,
                    "  {:>3} views {:<8} {:.2}%",
                    g.views,
                    g.method,
                    100.0 * g.relative_difference
                )?;
            }
        }
        if !self.degradation.is_empty() {
            writeln!(f, "\nRMSE growth from most to fewest views")?;
            for (m, mode, d) in &self.degradation {
                writeln!(f, "  {m:<8} {mode}: {:+.1}%", 100.0 * d)?;
            }
        }
        writeln!(f, "\nFindings")?;
        writeln!(f, "  ADSIR better than OS-SART in every cell: {}", flag(self.adsir_wins_everywhere))?;
        writeln!(
            f,
            "  ADSIR/OS-SART RMSE ratio <= 0.8 at fewest views: {}",
            flag(self.strong_gain_at_fewest_views)
        )?;
        writeln!(f, "  ADSIR degrades less than OS-SART: {}", flag(self.adsir_more_robust))?;
        writeln!(f, "  ES and EA within 10%: {}", flag(self.modes_equivalent))?;

        writeln!(f, "\nPublished reference values (different phantom, context only)")?;
        writeln!(f, "  views mode method    RMSE    SSIM")?;
        for r in published_results() {
            writeln!(
                f,
                "  {:>5} {:<4} {:<8} {:>7.1} {:.4}",
                r.views, r.mode, r.method, r.rmse, r.ssim
            )?;
        }
        for (v, e, s) in literature_est_rmse() {
            writeln!(f, "  {v:>5} ES   EST      {e:>7.1} {s:.4}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_ratios() {
        let rep = report(&published_results()).unwrap();
        let c = rep.ratios.iter().find(|c| c.views == 31 && c.mode == "ES").unwrap();
        assert!((c.rmse_ratio - 550.8 / 1719.4).abs() < 1e-12);
        assert!((c.rmse_ratio - 0.320).abs() < 5e-4);
        let g = rep
            .mode_gaps
            .iter()
            .find(|g| g.views == 55 && g.method == "OS-SART")
            .unwrap();
        assert!((g.relative_difference - 13.9 / 833.8).abs() < 1e-12);
        assert_eq!(rep.adsir_wins_everywhere, Some(true));
        assert_eq!(rep.strong_gain_at_fewest_views, Some(true));
        assert_eq!(rep.adsir_more_robust, Some(true));
        assert_eq!(rep.modes_equivalent, Some(true));
        assert_eq!(rep.rankings.len(), 6);
        assert!(rep.rankings.iter().all(|r| r.order[0].0 == "ADSIR"));
    }

    #[test]
    fn identical_modes_have_zero_gap() {
        let mut rows = Vec::new();
        for mode in ["ES", "EA"] {
            rows.push(ResultRow {
                views: 10,
                mode: mode.into(),
                method: "OS-SART".into(),
                rmse: 3.5,
                ssim: 0.9,
                seconds: 0.0,
            });
        }
        let rep = report(&rows).unwrap();
        assert_eq!(rep.mode_gaps[0].relative_difference, 0.0);
        assert_eq!(rep.adsir_wins_everywhere, None);
        assert!(report(&[]).is_err());
        assert!(rep.to_string().contains("not assessable"));
    }
}
