//! Sweep results serialization and the comparison-table renderer.
//!
//! The table mirrors the usual unlearning-results layout: one row per
//! method, a (D_e, Eval) column pair per forget count, entries at the
//! per-method best tau selected on the held-out split. A star marks the
//! best proposed strategy when its gap over random labelling is significant
//! at p < 0.001 in the one-tailed two-proportion z-test.

use std::collections::BTreeSet;

use unlearn_core::metrics::one_tailed_z_test;
use unlearn_core::unlearning::Strategy;

use crate::commands::SweepRow;

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("strategy,tau,n_forget,seed,uar_forget,uar_eval\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.6}\n",
            r.strategy, r.tau, r.n_forget, r.seed, r.uar_forget, r.uar_eval
        ));
    }
    out
}

pub fn rows_from_csv(text: &str) -> anyhow::Result<Vec<SweepRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| anyhow::anyhow!("empty results file"))?;
    let expected = "strategy,tau,n_forget,seed,uar_forget,uar_eval";
    if header != expected {
        anyhow::bail!("bad header `{header}` (expected `{expected}`)");
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            anyhow::bail!("row {lineno}: expected 6 columns, found {}", fields.len());
        }
        rows.push(SweepRow {
            strategy: fields[0]
                .parse::<Strategy>()
                .map_err(|e| anyhow::anyhow!("row {lineno}: {e}"))?,
            tau: fields[1]
                .parse()
                .map_err(|_| anyhow::anyhow!("row {lineno}: bad tau `{}`", fields[1]))?,
            n_forget: fields[2]
                .parse()
                .map_err(|_| anyhow::anyhow!("row {lineno}: bad n_forget `{}`", fields[2]))?,
            seed: fields[3]
                .parse()
                .map_err(|_| anyhow::anyhow!("row {lineno}: bad seed `{}`", fields[3]))?,
            uar_forget: fields[4]
                .parse()
                .map_err(|_| anyhow::anyhow!("row {lineno}: bad uar_forget `{}`", fields[4]))?,
            uar_eval: fields[5]
                .parse()
                .map_err(|_| anyhow::anyhow!("row {lineno}: bad uar_eval `{}`", fields[5]))?,
        });
    }
    if rows.is_empty() {
        anyhow::bail!("results file has no data rows");
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    forget: f64,
    eval: f64,
    starred: bool,
}

/// Seed-mean (D_e, Eval) for one strategy and N at its best-eval tau.
fn best_cell(rows: &[SweepRow], strategy: Strategy, n: usize) -> Option<Cell> {
    let taus: BTreeSet<u64> = rows
        .iter()
        .filter(|r| r.strategy == strategy && r.n_forget == n)
        .map(|r| r.tau.to_bits())
        .collect();
    let mut best: Option<Cell> = None;
    for tau_bits in taus {
        let tau = f64::from_bits(tau_bits);
        let cell: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.strategy == strategy && r.n_forget == n && r.tau == tau)
            .collect();
        let forget = cell.iter().map(|r| r.uar_forget).sum::<f64>() / cell.len() as f64;
        let eval = cell.iter().map(|r| r.uar_eval).sum::<f64>() / cell.len() as f64;
        if best.map(|b| eval > b.eval).unwrap_or(true) {
            best = Some(Cell {
                forget,
                eval,
                starred: false,
            });
        }
    }
    best
}

/// Renders the comparison table; `n_trials` is the total number of held-out
/// decisions behind each mean UAR (eval-set size summed over seeds), used to
/// size the z-test.
pub fn render_table(rows: &[SweepRow], n_trials: usize) -> anyhow::Result<String> {
    let ns: BTreeSet<usize> = rows.iter().map(|r| r.n_forget).collect();
    let strategies: Vec<Strategy> = Strategy::ALL
        .into_iter()
        .filter(|s| rows.iter().any(|r| r.strategy == *s))
        .collect();

    let mut cells: Vec<Vec<Option<Cell>>> = strategies
        .iter()
        .map(|&s| ns.iter().map(|&n| best_cell(rows, s, n)).collect())
        .collect();

    // star the best proposed strategy against random labelling per N
    for (j, &n) in ns.iter().enumerate() {
        let rl_eval = strategies
            .iter()
            .position(|&s| s == Strategy::RandomLabel)
            .and_then(|i| cells[i][j].map(|c| c.eval));
        let Some(rl_eval) = rl_eval else { continue };
        let proposed: Vec<usize> = strategies
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == Strategy::Adv || s == Strategy::AdvEla)
            .map(|(i, _)| i)
            .collect();
        let best_idx = proposed
            .into_iter()
            .filter(|&i| cells[i][j].is_some())
            .max_by(|&a, &b| {
                let (ea, eb) = (cells[a][j].unwrap().eval, cells[b][j].unwrap().eval);
                ea.partial_cmp(&eb).expect("finite UARs")
            });
        let Some(best_idx) = best_idx else { continue };
        let best_eval = cells[best_idx][j].unwrap().eval;
        let test = one_tailed_z_test(
            best_eval.clamp(0.0, 1.0),
            rl_eval.clamp(0.0, 1.0),
            n_trials,
            n_trials,
        )?;
        if !test.degenerate && test.p_value < 0.001 {
            cells[best_idx][j].as_mut().expect("present").starred = true;
            let _ = n; // n documents which column the star belongs to
        }
    }

    let name_width = strategies
        .iter()
        .map(|s| s.name().len())
        .max()
        .unwrap_or(8)
        .max("method".len());

    let mut out = String::new();
    out.push_str(&format!("{:<name_width$} |", "method"));
    for n in &ns {
        out.push_str(&format!("{:^16}|", format!("N={n}")));
    }
    out.push('\n');
    out.push_str(&format!("{:<name_width$} |", ""));
    for _ in &ns {
        out.push_str(&format!("{:>7} {:>7} |", "D_e", "Eval"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_width + 2 + ns.len() * 17));
    out.push('\n');
    for (i, strategy) in strategies.iter().enumerate() {
        out.push_str(&format!("{:<name_width$} |", strategy.name()));
        for j in 0..ns.len() {
            match cells[i][j] {
                Some(c) => {
                    let star = if c.starred { "*" } else { " " };
                    out.push_str(&format!("{:>7.3} {:>7.3}{star}|", c.forget, c.eval));
                }
                None => out.push_str(&format!("{:>7} {:>7} |", "-", "-")),
            }
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "\nentries: mean over seeds at the best-eval tau; *: p < 0.001 one-tailed z-test,\nbest proposed strategy vs random_label on the held-out split (n = {n_trials} per side).\n"
    ));
    Ok(out)
}
