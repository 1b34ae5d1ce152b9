//! Executes a [`RunSpec`] and writes its table.
//!
//! Grid points are independent. State-evolution points share one Monte-Carlo
//! sample set and run in parallel on `workers` threads, each point
//! single-threaded, so the numbers never depend on `workers`. Simulations run
//! one graph at a time (a graph at N = 10⁴ holds a few hundred MB) and spread
//! the trainings on that graph over the pool.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gcnsbm::bayes_optimal::{bo_acc_csbm, bo_acc_glmsbm, bo_solve_csbm, bo_solve_glmsbm_with};
use gcnsbm::closed_form::{c_star, rate_inf, RATE_BO};
use gcnsbm::mc::sample_mc;
use gcnsbm::simulator::{
    dataset_from_features, evaluate, gen_dataset, normalize_features, read_matrix_csv, split_label_column, Dataset,
    TrainConfig, TrainingProblem,
};
use gcnsbm::state_evolution::{predict_with_samples, Init, SolveConfig};
use gcnsbm::stats::mean_se;
use gcnsbm::{Metrics, Model};
use rayon::prelude::*;

use crate::error::CliError;
use crate::spec::{Command, Format, Point, RunSpec, Settings};
use crate::table::{write_csv, write_json, Row};

/// Directory for tables when `output` is not set.
pub const OUT_DIR_ENV: &str = "GCNSBM_OUT_DIR";

#[derive(Debug)]
pub struct Report {
    pub rows: Vec<Row>,
    /// Where the table went; `None` for `plot`.
    pub output: Option<PathBuf>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

impl Report {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(Row::failed)
    }
}

pub fn execute(spec: &RunSpec) -> Result<Report, CliError> {
    if spec.command == Command::Plot {
        let out = crate::plot::render_file(spec)?;
        return Ok(Report {
            rows: Vec::new(),
            lines: vec![format!("wrote {}", out.display())],
            output: Some(out),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.settings.workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", spec.settings.workers)))?;
    let points = spec.points();
    let s = &spec.settings;
    let mut lines = Vec::new();
    let rows = pool.install(|| -> Result<Vec<Row>, CliError> {
        Ok(match spec.command {
            Command::Se => se_rows(&points, s),
            Command::Bo => bo_rows(&points, s),
            Command::Sim => sim_rows(&points, s)?,
            Command::Sweep => {
                let mut rows = se_rows(&points, s);
                rows.extend(bo_rows(&points, s));
                if s.reps > 0 {
                    rows.extend(sim_rows(&points, s)?);
                }
                rows
            }
            Command::Rates => rate_rows(&points, &mut lines),
            Command::Cstar => cstar_rows(&points, s, &mut lines),
            Command::Plot => unreachable!(),
        })
    })?;
    let path = output_path(spec);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    match s.format {
        Format::Csv => write_csv(&rows, file)?,
        Format::Json => write_json(&rows, file)?,
    }
    Ok(Report {
        rows,
        output: Some(path),
        lines,
    })
}

pub fn output_path(spec: &RunSpec) -> PathBuf {
    if let Some(p) = &spec.settings.output {
        return p.clone();
    }
    let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    let ext = match spec.settings.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let stem = match &spec.preset {
        Some(p) => format!("{}-{p}", spec.command.name()),
        None => spec.command.name().to_string(),
    };
    dir.join(format!("{stem}.{ext}"))
}

fn describe(p: &Point) -> String {
    format!(
        "panel {} model {} alpha {} lambda {} mu {} rho {} loss {} r {} c {}",
        p.panel,
        p.model.name(),
        p.alpha,
        p.lambda,
        p.effective_mu(),
        p.rho,
        p.loss.name(),
        p.r,
        p.c
    )
}

/// Data-side columns of a row.
fn data_row(kind: &str, idx: usize, p: &Point) -> Row {
    Row {
        kind: kind.into(),
        panel: p.panel.clone(),
        point: idx,
        model: p.model.name().into(),
        alpha: p.alpha,
        lambda: p.lambda,
        mu: p.effective_mu(),
        rho: p.rho,
        rho_test: p.rho_test,
        ..Row::default()
    }
}

fn learner_row(kind: &str, idx: usize, p: &Point) -> Row {
    Row {
        loss: p.loss.name().into(),
        r: Some(p.r),
        c: Some(p.c),
        ..data_row(kind, idx, p)
    }
}

fn set_metrics(row: &mut Row, m: &Metrics) {
    row.acc_test = Some(m.acc_test);
    row.acc_train = Some(m.acc_train);
    row.e_test = Some(m.e_test);
    row.e_train = Some(m.e_train);
}

fn solve_config(s: &Settings) -> SolveConfig {
    SolveConfig {
        mc_count: s.mc_count,
        seed: s.seed,
        tol: s.tol,
        max_iter: s.max_iter,
        damping: s.damping,
        init: Init::Preset,
        workers: 1,
    }
}

fn se_rows(points: &[Point], s: &Settings) -> Vec<Row> {
    let cfg = solve_config(s);
    let mc = sample_mc(s.mc_count, s.seed);
    let rows: Vec<Row> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = learner_row("se", i, p);
            match cfg
                .validate()
                .and_then(|_| predict_with_samples(&p.data_params(), &p.gcn_params(), &cfg, &mc))
            {
                Ok((fp, m)) => {
                    set_metrics(&mut row, &m);
                    row.iterations = Some(fp.iterations);
                    row.residual = Some(fp.residual);
                    row.converged = Some(fp.converged);
                    if fp.floored {
                        row.note = "a Q-type quantity was floored".into();
                    }
                }
                Err(e) => row.failure = format!("{e} ({})", describe(p)),
            }
            row
        })
        .collect();
    if s.c_opt {
        best_c(rows)
    } else {
        rows
    }
}

/// Keeps, in every group that differs only in `c`, the row of highest test
/// accuracy. Failed rows are kept so failures stay visible.
fn best_c(rows: Vec<Row>) -> Vec<Row> {
    let key = |r: &Row| {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{:?}|{:?}",
            r.kind, r.panel, r.model, r.alpha, r.lambda, r.mu, r.rho, r.rho_test, r.d, r.loss, r.n.unwrap_or(0),
            r.r, r.rep
        )
    };
    let mut order: Vec<String> = Vec::new();
    let mut best: BTreeMap<String, (Row, usize)> = BTreeMap::new();
    let mut failed = Vec::new();
    for row in rows {
        if row.failed() || row.acc_test.is_none() {
            failed.push(row);
            continue;
        }
        let k = key(&row);
        match best.get_mut(&k) {
            None => {
                order.push(k.clone());
                best.insert(k, (row, 1));
            }
            Some((b, count)) => {
                *count += 1;
                if row.acc_test > b.acc_test {
                    *b = row;
                }
            }
        }
    }
    let mut out: Vec<Row> = order
        .into_iter()
        .map(|k| {
            let (mut row, count) = best.remove(&k).expect("key was inserted");
            row.note = join_note(&row.note, &format!("best of {count} c values"));
            row
        })
        .collect();
    out.extend(failed);
    out.sort_by_key(|r| r.point);
    out
}

fn join_note(a: &str, b: &str) -> String {
    if a.is_empty() {
        b.to_string()
    } else {
        format!("{a}; {b}")
    }
}

/// First point of every distinct data setting, in grid order.
fn distinct_data(points: &[Point]) -> Vec<(usize, &Point)> {
    let mut seen = std::collections::HashSet::new();
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| seen.insert(p.data_key()))
        .collect()
}

fn bo_rows(points: &[Point], s: &Settings) -> Vec<Row> {
    let cfg = solve_config(s);
    distinct_data(points)
        .into_par_iter()
        .map(|(i, p)| {
            let mut row = data_row("bo", i, p);
            let dp = p.data_params();
            let res = match p.model {
                Model::Csbm => bo_solve_csbm(&dp, &cfg).map(|st| (bo_acc_csbm(&st), st.iterations, st.converged, false)),
                Model::GlmSbm => bo_solve_glmsbm_with(&dp, &cfg, s.supervised)
                    .and_then(|st| Ok((bo_acc_glmsbm(&st)?, st.iterations, st.converged, st.my_below_rho))),
            };
            match res {
                Ok((acc, it, conv, below)) => {
                    row.acc_test = Some(acc);
                    row.iterations = Some(it);
                    row.converged = Some(conv);
                    if below {
                        row.note = "fixed point has m_y below rho".into();
                    }
                }
                Err(e) => row.failure = format!("{e} ({})", describe(p)),
            }
            row
        })
        .collect()
}

fn rate_rows(points: &[Point], lines: &mut Vec<String>) -> Vec<Row> {
    let mut seen = std::collections::HashSet::new();
    let mut rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !seen.insert(format!("{}|{}|{}|{}", p.panel, p.model.name(), p.alpha, p.effective_mu())) {
            continue;
        }
        let gcn = rate_inf(&p.data_params());
        lines.push(format!(
            "{} alpha={} mu={}: gcn rate {gcn:.6}, bayes-optimal rate {RATE_BO}",
            p.model.name(),
            p.alpha,
            p.effective_mu()
        ));
        for (q, v) in [("rate_gcn", gcn), ("rate_bo", RATE_BO)] {
            rows.push(Row {
                quantity: q.into(),
                value: Some(v),
                ..data_row("rates", i, p)
            });
        }
    }
    rows
}

fn cstar_rows(points: &[Point], s: &Settings, lines: &mut Vec<String>) -> Vec<Row> {
    distinct_data(points)
        .into_iter()
        .map(|(i, p)| {
            let mut row = Row {
                quantity: "c_star".into(),
                note: format!("{:?}", s.regime).to_lowercase(),
                ..data_row("cstar", i, p)
            };
            match c_star(&p.data_params(), s.regime) {
                Ok(c) => {
                    row.value = Some(c);
                    lines.push(format!(
                        "{} alpha={} lambda={} mu={} rho={}: c* = {c:.6}, lambda c* = {:.6}",
                        p.model.name(),
                        p.alpha,
                        p.lambda,
                        p.effective_mu(),
                        p.rho,
                        p.lambda * c
                    ));
                }
                Err(e) => {
                    row.failure = format!("{e} ({})", describe(p));
                    lines.push(format!("lambda={}: {}", p.lambda, row.failure));
                }
            }
            row
        })
        .collect()
}

/// The graph for one data setting and repetition.
fn make_dataset(p: &Point, s: &Settings, seed: u64) -> Result<Dataset, gcnsbm::Error> {
    let dp = p.data_params();
    let ds = match &s.features {
        Some(path) => {
            let raw = read_matrix_csv(path)?;
            let col = s.label_column.expect("validated with features");
            let (x, y) = split_label_column(&raw, col)?;
            let x = normalize_features(x, s.epsilon, seed)?;
            let dp = gcnsbm::DataParams {
                alpha: x.nrows() as f64 / x.ncols() as f64,
                d: p.d.value(x.nrows()),
                ..dp
            };
            dataset_from_features(&dp, x, y, s.mode, seed)?
        }
        None => gen_dataset(&dp, p.n, s.mode, seed)?,
    };
    Ok(if s.symmetrize { ds.symmetrize() } else { ds })
}

fn sim_rows(points: &[Point], s: &Settings) -> Result<Vec<Row>, CliError> {
    let tc = TrainConfig {
        grad_tol: s.grad_tol,
        max_steps: s.max_steps,
        ..TrainConfig::default()
    };
    tc.validate()?;
    // Points sharing a graph, in grid order.
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let k = p.data_key();
        match groups.iter_mut().find(|(g, _)| *g == k) {
            Some((_, v)) => v.push(i),
            None => groups.push((k, vec![i])),
        }
    }
    let mut per_rep: Vec<Row> = Vec::new();
    for (_, members) in &groups {
        let first = &points[members[0]];
        for rep in 0..s.reps {
            let seed = s.seed.wrapping_add(rep as u64);
            let base = |i: usize| {
                let p = &points[i];
                Row {
                    rep: Some(rep),
                    d: p.d.to_string(),
                    n: Some(p.n),
                    ..learner_row("sim", i, p)
                }
            };
            let ds = match make_dataset(first, s, seed) {
                Ok(ds) => ds,
                Err(e) => {
                    per_rep.extend(members.iter().map(|&i| Row {
                        failure: format!("{e} ({}, seed {seed})", describe(&points[i])),
                        ..base(i)
                    }));
                    continue;
                }
            };
            let (n, alpha) = (ds.n, ds.n as f64 / ds.m_dim as f64);
            let problem = TrainingProblem::new(&ds, &ds.train_mask);
            let mut cs: Vec<f64> = members.iter().map(|&i| points[i].c).collect();
            cs.sort_by(f64::total_cmp);
            cs.dedup();
            let rows: Vec<Vec<Row>> = cs
                .par_iter()
                .map(|&c| {
                    let design = problem.design(c);
                    members
                        .iter()
                        .filter(|&&i| points[i].c == c)
                        .map(|&i| {
                            let p = &points[i];
                            let mut row = Row { n: Some(n), alpha, ..base(i) };
                            let gp = p.gcn_params();
                            match gp.validate().and_then(|_| design.train(p.loss, p.r, &tc)) {
                                Ok(res) => {
                                    set_metrics(&mut row, &evaluate(&ds, &res.w, &gp));
                                    row.iterations = Some(res.steps);
                                    row.residual = Some(res.grad_norm);
                                    row.converged = Some(res.grad_norm <= tc.grad_tol);
                                }
                                Err(e) => row.failure = format!("{e} ({}, seed {seed})", describe(p)),
                            }
                            row
                        })
                        .collect()
                })
                .collect();
            per_rep.extend(rows.into_iter().flatten());
        }
    }
    per_rep.sort_by_key(|r| (r.point, r.rep));
    let mut means = mean_rows(&per_rep, s.reps);
    if s.c_opt {
        per_rep = best_c(per_rep);
        means = best_c(means);
    }
    per_rep.extend(means);
    Ok(per_rep)
}

/// Averages the per-repetition rows of each point, with standard errors.
fn mean_rows(per_rep: &[Row], reps: usize) -> Vec<Row> {
    let mut out = Vec::new();
    for chunk in per_rep.chunk_by(|a, b| a.point == b.point) {
        let ok: Vec<&Row> = chunk.iter().filter(|r| !r.failed()).collect();
        let mut row = Row {
            kind: "sim-mean".into(),
            rep: None,
            iterations: None,
            residual: None,
            converged: None,
            ..chunk[0].clone()
        };
        row.failure.clear();
        if ok.is_empty() {
            row.failure = format!("all {} repetitions failed: {}", chunk.len(), chunk[0].failure);
            row.acc_test = None;
            row.acc_train = None;
            row.e_test = None;
            row.e_train = None;
        } else {
            let stat = |f: fn(&Row) -> Option<f64>| {
                let xs: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                let (m, se) = mean_se(&xs);
                (Some(m), Some(se))
            };
            (row.acc_test, row.acc_test_se) = stat(|r| r.acc_test);
            (row.acc_train, row.acc_train_se) = stat(|r| r.acc_train);
            (row.e_test, row.e_test_se) = stat(|r| r.e_test);
            (row.e_train, row.e_train_se) = stat(|r| r.e_train);
            row.converged = Some(ok.iter().all(|r| r.converged == Some(true)));
            if ok.len() < reps {
                row.note = format!("{} of {reps} repetitions failed", reps - ok.len());
            }
        }
        out.push(row);
    }
    out
}
