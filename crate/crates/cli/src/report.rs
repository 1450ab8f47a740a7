//! Report bundle: importance table, heat maps, threshold sweep and run summary.

use std::fmt::Write;
use std::path::Path;

use dynbias::dgp::DgpModel;
use dynbias::Trial;

use crate::artifacts::{slug, write_text, MarginalFile, MetricsFile, ReportFile, SweepFile, SweepRow};
use crate::provenance::Provenance;
use crate::svg;

/// Individual importances, one row per parameter and one column per response.
pub fn importance_table(reports: &[ReportFile], prov: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = prov {
        out.push_str(&p.csv_comment());
    }
    let columns: Vec<String> = reports.iter().map(column_name).collect();
    let _ = writeln!(out, "param,{}", columns.join(","));
    let mut params: Vec<&str> = Vec::new();
    for r in reports {
        for p in &r.report.individual {
            if !params.contains(&p.param.as_str()) {
                params.push(&p.param);
            }
        }
    }
    for p in params {
        let cells: Vec<String> = reports
            .iter()
            .map(|r| r.report.individual(p).map_or("-".to_string(), |v| format!("{v:.5}")))
            .collect();
        let _ = writeln!(out, "{p},{}", cells.join(","));
    }
    out
}

fn column_name(r: &ReportFile) -> String {
    r.activity.clone().unwrap_or_else(|| r.report.response.clone())
}

pub fn sweep_csv(rows: &[SweepRow], prov: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = prov {
        out.push_str(&p.csv_comment());
    }
    out.push_str("tau_imp,mean_f1,std_f1,mean_subset_size\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.tau_imp, r.mean_f1, r.std_f1, r.mean_subset_size);
    }
    out
}

pub struct ReportInputs<'a> {
    pub trials: &'a [Trial],
    pub reports: &'a [ReportFile],
    pub marginals: &'a [MarginalFile],
    pub dgp: Option<&'a DgpModel>,
    pub metrics: &'a [MetricsFile],
    pub sweep: Option<&'a SweepFile>,
}

pub fn summary_markdown(inputs: &ReportInputs, prov: Option<&Provenance>) -> String {
    let mut out = String::from("# Run summary\n\n");
    if let Some(p) = prov {
        let _ = writeln!(out, "Provenance: `{}`\n", p.line());
    }
    let _ = writeln!(out, "## Exploration\n");
    let _ = writeln!(out, "- trials: {}", inputs.trials.len());
    if let Some(best) = inputs.trials.iter().min_by(|a, b| a.nu.total_cmp(&b.nu).then(a.trial_id.cmp(&b.trial_id))) {
        let _ = writeln!(out, "- best nu: {:.4} (trial {}, f1 {:.4})", best.nu, best.trial_id, best.f1);
    }
    if !inputs.reports.is_empty() {
        let _ = writeln!(out, "\n## Importance\n");
        for r in inputs.reports {
            let top = r
                .report
                .individual
                .iter()
                .max_by(|a, b| a.importance.total_cmp(&b.importance));
            let _ = write!(out, "- {}: ", column_name(r));
            match top {
                Some(p) if !r.report.degenerate => {
                    let _ = writeln!(out, "top parameter `{}` ({:.4}); order 1+2 total {:.4}", p.param, p.importance, r.report.total_fraction());
                }
                _ => {
                    let _ = writeln!(out, "degenerate (constant response)");
                }
            }
        }
    }
    if let Some(d) = inputs.dgp {
        let _ = writeln!(out, "\n## Data generation model (tau_imp {}, tau_int {})\n", d.tau_imp, d.tau_int);
        for (y, a) in &d.per_activity {
            let s: Vec<&str> = a.subset.iter().map(String::as_str).collect();
            let _ = writeln!(out, "- {y}: {{{}}}", s.join(", "));
        }
    }
    if !inputs.metrics.is_empty() {
        let _ = writeln!(out, "\n## Recognition\n\n| setting | mean f1 | std f1 | mean nu |\n|---|---|---|---|");
        for m in inputs.metrics {
            let s = &m.summary;
            let _ = writeln!(out, "| {} | {:.4} | {:.4} | {:.4} |", s.mode, s.mean_f1, s.std_f1, s.mean_nu);
        }
    }
    if let Some(sw) = inputs.sweep {
        let _ = writeln!(out, "\n## Threshold sweep (tau_int {})\n\n| tau_imp | mean f1 | std f1 | mean subset size |\n|---|---|---|---|", sw.tau_int);
        for r in &sw.rows {
            let _ = writeln!(out, "| {} | {:.4} | {:.4} | {:.2} |", r.tau_imp, r.mean_f1, r.std_f1, r.mean_subset_size);
        }
    }
    out
}

/// Writes every report artifact under `dir`; returns notices for skipped parts.
pub fn write_bundle(dir: &Path, inputs: &ReportInputs, prov: &Provenance) -> Result<Vec<String>, String> {
    let mut notices = Vec::new();
    write_text(&dir.join("importance.csv"), &importance_table(inputs.reports, Some(prov)))?;
    if inputs.marginals.is_empty() {
        notices.push("no pairwise marginals; heat maps skipped".to_string());
    }
    for m in inputs.marginals {
        let title = format!("marginal of {} and {}", m.grid.u, m.grid.v);
        let name = format!("marginal_{}__{}.svg", slug(&m.grid.u), slug(&m.grid.v));
        write_text(&dir.join(name), &svg::heatmap(&m.grid, &title, Some(prov)))?;
    }
    match inputs.sweep {
        Some(sw) => {
            write_text(&dir.join("tau_sweep.csv"), &sweep_csv(&sw.rows, Some(prov)))?;
            write_text(&dir.join("tau_sweep.svg"), &svg::sweep_plot(&sw.rows, sw.n_sources, Some(prov)))?;
        }
        None => notices.push("no threshold sweep; sweep plot skipped".to_string()),
    }
    write_text(&dir.join("summary.md"), &summary_markdown(inputs, Some(prov)))?;
    Ok(notices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dynbias::fanova::{ImportanceReport, ParamImportance};

    fn report(activity: Option<&str>, vals: &[(&str, f64)]) -> ReportFile {
        ReportFile {
            activity: activity.map(str::to_string),
            report: ImportanceReport {
                response: "nu".into(),
                total_variance: 1.0,
                degenerate: false,
                n_trees: 1,
                n_trees_used: 1,
                individual: vals
                    .iter()
                    .map(|(p, v)| ParamImportance {
                        param: p.to_string(),
                        importance: *v,
                    })
                    .collect(),
                pairwise: vec![],
            },
            provenance: None,
        }
    }

    #[test]
    fn table_layout() {
        let t = importance_table(&[report(None, &[("lr", 0.1), ("ks1", 0.2)]), report(Some("walk"), &[("lr", 0.3)])], None);
        assert_eq!(t, "param,nu,walk\nlr,0.10000,0.30000\nks1,0.20000,-\n");
    }

    #[test]
    fn sweep_rows() {
        let rows: Vec<SweepRow> = [0.0, 0.2, 0.4, 0.6]
            .iter()
            .map(|&t| SweepRow {
                tau_imp: t,
                mean_f1: 0.5,
                std_f1: 0.0,
                mean_subset_size: 1.0,
            })
            .collect();
        let csv = sweep_csv(&rows, None);
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next().unwrap(), "tau_imp,mean_f1,std_f1,mean_subset_size");
    }

    #[test]
    fn empty_marginals_skip_heat_maps() {
        let dir = tempfile::tempdir().unwrap();
        let prov = Provenance::single("report", 0, "h".into());
        let inputs = ReportInputs {
            trials: &[],
            reports: &[],
            marginals: &[],
            dgp: None,
            metrics: &[],
            sweep: None,
        };
        let notices = write_bundle(dir.path(), &inputs, &prov).unwrap();
        assert!(notices.iter().any(|n| n.contains("heat maps skipped")));
        assert!(dir.path().join("summary.md").exists());
    }
}
