//! Batch driver: seeded pipelines writing CSV/JSON artifacts and a report of
//! every invariant they exercise.

pub mod config;
pub mod pipelines;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::combinatorics::{enumerate_all, enumerate_baxter, enumerate_meanders, is_baxter, reroot_permutation, EnsembleKind, PermutationEnsemble};
use crate::curve::{build_curve, mass_parametrize, induced_permutation, CellCurve, CurveKind, Symmetry};
use crate::error::{Error, Result};
use crate::measure::{build_measure, GridMeasure, MeasureKind};
use crate::permuton::{graph_of_psi_cells, permuton_from_pair, permuton_from_permutation, support_of, tm_compatible_cells};
use crate::tm::geometric_graph;
use crate::tutte::{harmonic_measure, mc_harmonic_oracle};
use crate::walks::{increment_correlation, mated_crt_graph, mated_crt_graph_brute, sample_walk_pair};

pub use config::{Pipeline, RunConfig, TmSource};
use pipelines::{build_chain, embed_chain, field_recovery, recover_geometry, support_chain_violations, Chain, EmbedResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Invariant,
    Measurement,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub pipeline: Pipeline,
    pub seed: u64,
    pub config: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Report {
    fn new(cfg: &RunConfig) -> Self {
        let mut config: BTreeMap<String, Value> = match serde_json::to_value(cfg) {
            Ok(Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        // artifacts must not depend on where they are written
        config.remove("out");
        Report {
            pipeline: cfg.pipeline,
            seed: cfg.seed,
            config,
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn invariant(&mut self, name: &str, passed: bool, value: impl Into<Value>) {
        self.checks.push(Check {
            name: name.into(),
            kind: CheckKind::Invariant,
            passed,
            value: value.into(),
        });
    }

    pub fn measurement(&mut self, name: &str, passed: bool, value: impl Into<Value>) {
        self.checks.push(Check {
            name: name.into(),
            kind: CheckKind::Measurement,
            passed,
            value: value.into(),
        });
    }

    /// Measurements are reported but never fail a run.
    pub fn all_invariants_pass(&self) -> bool {
        self.checks.iter().filter(|c| c.kind == CheckKind::Invariant).all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

struct Artifacts<'a> {
    dir: &'a Path,
    report: &'a mut Report,
}

impl Artifacts<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.report.artifacts.push(name.into());
        Ok(())
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ (Error::Invariant { .. } | Error::Config(_) | Error::Io(_)) => e,
        other => Error::Invariant {
            stage: name.into(),
            detail: other.to_string(),
        },
    })
}

fn curves(cfg: &RunConfig) -> Result<(CellCurve, CellCurve)> {
    let c1 = stage("curves", build_curve(cfg.curve1, cfg.depth, cfg.sym1))?;
    let c2 = stage("curves", build_curve(cfg.curve2, cfg.depth, cfg.sym2))?;
    Ok((c1, c2))
}

fn measure(cfg: &RunConfig) -> Result<GridMeasure> {
    stage("measure", build_measure(cfg.measure, cfg.depth, cfg.params(), cfg.seed))
}

fn ones(v: &[usize]) -> String {
    v.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(" ") + "\n"
}

/// Runs the configured pipeline, writing artifacts and `report.json` under
/// `cfg.out`. Stage failures abort with the stage name.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut report = Report::new(cfg);
    let mut art = Artifacts {
        dir: &cfg.out,
        report: &mut report,
    };
    match cfg.pipeline {
        Pipeline::Measure => run_measure(cfg, &mut art)?,
        Pipeline::Curves => run_curves(cfg, &mut art)?,
        Pipeline::Walks => run_walks(cfg, &mut art)?,
        Pipeline::Permuton => run_permuton(cfg, &mut art)?,
        Pipeline::Augment | Pipeline::Tm | Pipeline::Graph => run_chain(cfg, &mut art).map(|_| ())?,
        Pipeline::Geometry => run_geometry(cfg, &mut art).map(|_| ())?,
        Pipeline::Embed => run_embed(cfg, &mut art).map(|_| ())?,
        Pipeline::Reconstruct => run_reconstruct(cfg, &mut art)?,
        Pipeline::Recover => run_recover(cfg, &mut art)?,
        Pipeline::Ensembles => run_ensembles(cfg, &mut art)?,
        Pipeline::Verify => run_verify(cfg, &mut art)?,
    }
    let text = report.to_json();
    std::fs::write(cfg.out.join("report.json"), text)?;
    Ok(report)
}

fn run_measure(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let m = measure(cfg)?;
    art.write("measure.csv", &m.to_csv())?;
    let total = crate::numeric::sum(m.masses().iter().copied());
    art.report.invariant("measure.total_mass_is_one", (total - 1.0).abs() < 1e-12, total);
    let min = m.masses().iter().copied().fold(f64::INFINITY, f64::min);
    art.report.invariant("measure.masses_positive", min > 0.0, min);
    if let Some(rho) = m.rho() {
        art.report.measurement("measure.rho", true, rho);
    }
    Ok(())
}

fn run_curves(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let (c1, c2) = curves(cfg)?;
    let m = measure(cfg)?;
    let t1 = stage("curves", mass_parametrize(&c1, &m))?;
    let t2 = stage("curves", mass_parametrize(&c2, &m))?;
    art.write("curve1.csv", &t1.to_csv())?;
    art.write("curve2.csv", &t2.to_csv())?;
    let ip = stage("curves", induced_permutation(&t1, &t2))?;
    art.write("sigma.txt", &ones(&ip.sigma))?;
    let inv = ip.inverse();
    let roundtrip = (0..ip.sigma.len()).all(|k| inv[ip.sigma[k]] == k);
    art.report.invariant("curves.sigma_is_bijection", roundtrip, ip.sigma.len());
    let last = *t1.breakpoints().last().unwrap_or(&0.0);
    art.report.invariant("curves.last_breakpoint_is_one", last == 1.0, last);
    Ok(())
}

fn run_walks(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let rho = crate::measure::rho_of_gamma(cfg.gamma);
    let w = stage("walks", sample_walk_pair(cfg.n, rho, cfg.seed, cfg.boundary))?;
    art.write("walks.csv", &w.to_csv())?;
    let g = mated_crt_graph(&w);
    art.write("mated_crt.json", &g.to_json())?;
    if cfg.n <= 5000 {
        let mism = g.mismatched_edges(&mated_crt_graph_brute(&w));
        art.report.invariant("walks.fast_equals_brute", mism == 0, mism);
    }
    art.report.invariant("walks.graph_connected", g.is_connected(), g.edge_count());
    let r = increment_correlation(&w);
    let sd = (1.0 - rho * rho) / (cfg.n as f64).sqrt();
    art.report.measurement("walks.increment_correlation", (r - rho).abs() < 5.0 * sd, json!({"value": r, "rho": rho, "sd": sd}));
    Ok(())
}

fn run_permuton(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let (c1, c2) = curves(cfg)?;
    let m = measure(cfg)?;
    let t1 = stage("permuton", mass_parametrize(&c1, &m))?;
    let t2 = stage("permuton", mass_parametrize(&c2, &m))?;
    let res = c1.len();
    let p = stage("permuton", permuton_from_pair(&t1, &t2, &m, res))?;
    art.write("permuton.csv", &p.to_csv())?;
    let s = support_of(&p, 0.0);
    art.write("support.csv", &s.to_csv())?;
    let defect = p.marginal_defect();
    art.report.invariant("permuton.marginals_uniform", defect < 1e-12, defect);
    let (v1, v2) = stage("permuton", support_chain_violations(&t1, &t2, &m, res))?;
    art.report.invariant("permuton.support_in_graph_of_psi", v1 == 0, v1);
    art.report.invariant("permuton.graph_of_psi_in_compatible", v2 == 0, v2);
    let diagonal = s.cells.iter().all(|&(r, c)| r == c) && s.cells.len() == res;
    art.report.measurement("permuton.support_is_diagonal", true, diagonal);
    if c1 == c2 {
        art.report.invariant("permuton.identical_pair_gives_diagonal", diagonal, diagonal);
    }
    let psi = graph_of_psi_cells(&t1, &t2, res).len();
    let compatible = tm_compatible_cells(&t1, &t2, res).len();
    art.report.measurement("permuton.cell_counts", true, json!({"support": s.cells.len(), "graph_of_psi": psi, "compatible": compatible}));
    Ok(())
}

fn run_chain(cfg: &RunConfig, art: &mut Artifacts) -> Result<Chain> {
    let (c1, c2) = curves(cfg)?;
    let chain = stage("tm", build_chain(&c1, &c2, cfg.tm_source, cfg.frame, cfg.planted, cfg.seed))?;
    if let (Some(s), Some(a)) = (&chain.support, &chain.augmented) {
        art.write("support.csv", &s.to_csv())?;
        art.write("augmented.csv", &a.support().to_csv())?;
        let again = crate::permuton::augment_support(a.support());
        art.report.invariant("augment.idempotent", &again == a, a.support().cells.len());
        let other = crate::tm::extended_cells(&c2, cfg.frame);
        let points = crate::tm::plant_points(&chain.cells, &other, cfg.planted, cfg.seed);
        let join = crate::tm::tm_partition_join(&chain.cells, &other, &points);
        art.report.invariant("tm.equals_partition_join", join == chain.tm, chain.tm.pairs().len());
        let oracle = crate::tm::tm_oracle_from_curve(&c1, cfg.frame);
        art.report.invariant("tm.subset_of_oracle", chain.tm.is_subset(&oracle), oracle.pairs().len());
        art.report.measurement("tm.planted_points", true, chain.planted);
    }
    art.write("tm.csv", &chain.tm.to_csv())?;
    art.write("graph.json", &chain.graph.to_json())?;
    let mism = chain.graph.mismatched_edges(&geometric_graph(&chain.cells));
    if cfg.tm_source == TmSource::Oracle || chain.planted == 0 {
        art.report.invariant("graph.equals_geometric", mism == 0, mism);
    } else {
        // planted double visits hide relations, so extra edges are expected
        art.report.measurement("graph.equals_geometric", mism == 0, mism);
    }
    art.report.measurement("graph.edges", true, chain.graph.edge_count());
    Ok(chain)
}

fn run_geometry(cfg: &RunConfig, art: &mut Artifacts) -> Result<Chain> {
    let chain = run_chain(cfg, art)?;
    let geo = stage("geometry", recover_geometry(&chain, cfg.delta))?;
    art.write("geometry.json", &(geo.to_json() + "\n"))?;
    let closed = geo.pstar.first() == geo.pstar.last();
    art.report.invariant("geometry.boundary_path_closed", closed, geo.pstar.len());
    let covered = geo.boundary.iter().all(|t| geo.pstar.contains(t));
    art.report.invariant("geometry.path_covers_boundary", covered, geo.boundary.len());
    art.report.measurement("geometry.cut_times", true, geo.cuts.len());
    Ok(chain)
}

fn embed_checks(cfg: &RunConfig, e: &EmbedResult, art: &mut Artifacts) -> Result<()> {
    let off = e.geometry.a;
    art.write("embedding.csv", &e.embedding.to_csv(off))?;
    art.write("truth.csv", &{
        let mut s = String::from("vertex,x,y\n");
        for (v, (x, y)) in e.truth.iter().enumerate() {
            s.push_str(&format!("{},{},{}\n", v + off + 1, x, y));
        }
        s
    })?;
    let diag = json!({
        "residual": e.embedding.residual,
        "solver_iters": e.embedding.solver_iters,
        "walks": cfg.walks,
        "seed": cfg.seed,
    });
    art.write("diagnostics.json", &(diag.to_string() + "\n"))?;
    art.report.invariant("embed.residual_below_1e-8", e.embedding.residual < 1e-8, e.embedding.residual);
    let pmax = e.max_interior_modulus();
    art.report.invariant("embed.maximum_principle", pmax < 1.0, pmax);
    let monotone = e.embedding.prefix.windows(2).all(|w| w[0] <= w[1]) && e.embedding.prefix.last() == Some(&1.0);
    art.report.invariant("embed.prefix_monotone_to_one", monotone, e.embedding.prefix.len());
    art.report.measurement(
        "embed.alignment_to_truth",
        true,
        json!({"angle": e.alignment.angle, "conjugate": e.alignment.conjugate, "rms": e.alignment.rms}),
    );
    if cfg.walks > 0 {
        let exact = stage("embed", harmonic_measure(&e.subgraph, e.x, &e.pstar))?;
        let mc = stage("embed", mc_harmonic_oracle(&e.subgraph, e.x, &e.pstar, cfg.walks, cfg.seed))?;
        let mut prev = 0.0;
        let mut worst: f64 = 0.0;
        for (k, &p) in exact.increments.iter().enumerate() {
            let emp = mc[k] - prev;
            prev = mc[k];
            let sd = (p * (1.0 - p) / cfg.walks as f64).sqrt().max(1.0 / cfg.walks as f64);
            worst = worst.max((emp - p).abs() / sd);
        }
        // many boundary vertices: a few beyond 3 sigma are expected by chance
        art.report.measurement("embed.mc_within_3_sigma", worst <= 3.0, worst);
    }
    Ok(())
}

fn run_embed(cfg: &RunConfig, art: &mut Artifacts) -> Result<(Chain, EmbedResult)> {
    let chain = run_geometry(cfg, art)?;
    let c1 = stage("embed", build_curve(cfg.curve1, cfg.depth, cfg.sym1))?;
    let e = stage("embed", embed_chain(&chain, &c1, cfg.delta, cfg.tol))?;
    embed_checks(cfg, &e, art)?;
    Ok((chain, e))
}

fn field_checks(cfg: &RunConfig, m: &GridMeasure, art: &mut Artifacts) -> Result<()> {
    let gamma = m.gamma().unwrap_or(if cfg.measure == MeasureKind::Cascade { 1.0 } else { cfg.gamma });
    let eps = cfg.eps_cells * m.spacing();
    let field = stage("recover", crate::measure::log_mass_field(m, gamma, eps))?;
    art.write("field.csv", &field.to_csv())?;
    if m.kind() == MeasureKind::Cascade {
        let fr = stage("recover", field_recovery(m, gamma, cfg.eps_cells))?;
        art.report.measurement(
            "recover.cascade_block_error",
            fr.max_error < 0.1,
            json!({"level": fr.level, "max_error": fr.max_error}),
        );
    }
    Ok(())
}

fn run_reconstruct(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let m = measure(cfg)?;
    art.write("measure.csv", &m.to_csv())?;
    let (c1, _) = curves(cfg)?;
    let t1 = stage("reconstruct", mass_parametrize(&c1, &m))?;
    art.write("curve1.csv", &t1.to_csv())?;
    run_embed(cfg, art)?;
    field_checks(cfg, &m, art)
}

fn run_recover(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let m = measure(cfg)?;
    art.write("measure.csv", &m.to_csv())?;
    field_checks(cfg, &m, art)
}

fn ensemble(cfg: &RunConfig) -> Result<PermutationEnsemble> {
    stage(
        "ensembles",
        match cfg.ensemble {
            EnsembleKind::Meandric => enumerate_meanders(cfg.n, cfg.convention),
            EnsembleKind::Baxter => enumerate_baxter(cfg.n),
            EnsembleKind::All => enumerate_all(cfg.n),
        },
    )
}

fn reroot_closed(e: &PermutationEnsemble) -> Result<bool> {
    let sorted = e.sorted_members();
    for i in 1..=e.n {
        let mut moved = e.members.iter().map(|p| reroot_permutation(p, i)).collect::<Result<Vec<_>>>()?;
        moved.sort();
        if moved != sorted {
            return Ok(false);
        }
    }
    Ok(true)
}

fn run_ensembles(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let e = ensemble(cfg)?;
    art.write("ensemble.txt", &e.to_text())?;
    let mut sorted = e.sorted_members();
    sorted.dedup();
    art.report.invariant("ensembles.members_distinct", sorted.len() == e.members.len(), e.members.len());
    art.report.measurement("ensembles.count", true, e.members.len());
    if cfg.ensemble == EnsembleKind::Meandric {
        let closed = stage("ensembles", reroot_closed(&e))?;
        art.report.invariant("ensembles.meandric_reroot_multiset_equal", closed, e.n);
        let worst = e
            .members
            .iter()
            .map(|p| permuton_from_permutation(p, None).map(|q| q.marginal_defect()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        art.report.invariant("ensembles.meandric_marginals_uniform", worst < 1e-12, worst);
    }
    if cfg.ensemble == EnsembleKind::Baxter {
        let ok = e.members.iter().all(|p| is_baxter(p));
        art.report.invariant("ensembles.all_baxter", ok, e.members.len());
    }
    Ok(())
}

fn run_verify(cfg: &RunConfig, art: &mut Artifacts) -> Result<()> {
    let mut mism = 0;
    for kind in CurveKind::ALL {
        for sym in Symmetry::ALL {
            for d in 1..=cfg.depth.min(5) {
                let c = stage("verify", build_curve(kind, d, sym))?;
                mism += stage("verify", pipelines::oracle_graph_mismatches(&c))?;
            }
        }
    }
    art.report.invariant("verify.oracle_graph_equals_geometric", mism == 0, mism);

    let mut viol = 0;
    let mut aug_ok = true;
    for kind in [MeasureKind::Lebesgue, MeasureKind::Cascade, MeasureKind::ExpField] {
        let d = cfg.depth.min(4);
        let m = stage("verify", build_measure(kind, d, cfg.params(), cfg.seed))?;
        let c1 = stage("verify", build_curve(cfg.curve1, d, cfg.sym1))?;
        let c2 = stage("verify", build_curve(cfg.curve2, d, cfg.sym2))?;
        let t1 = stage("verify", mass_parametrize(&c1, &m))?;
        let t2 = stage("verify", mass_parametrize(&c2, &m))?;
        let (a, b) = stage("verify", support_chain_violations(&t1, &t2, &m, c1.len()))?;
        viol += a + b;
        let (agree, idem) = pipelines::augmentation_agrees(c1.cells(), c2.cells(), cfg.planted, cfg.seed);
        aug_ok &= agree && idem;
    }
    art.report.invariant("verify.support_chain", viol == 0, viol);
    art.report.invariant("verify.augmentation", aug_ok, aug_ok);

    let e = stage("verify", enumerate_meanders(cfg.n.min(5), cfg.convention))?;
    let closed = stage("verify", reroot_closed(&e))?;
    art.report.invariant("verify.meandric_reroot_multiset_equal", closed, e.members.len());

    let mut worst = 0;
    for s in 0..5u64 {
        let w = stage("verify", sample_walk_pair(120, crate::measure::rho_of_gamma(cfg.gamma), cfg.seed.wrapping_add(s), cfg.boundary))?;
        worst += mated_crt_graph(&w).mismatched_edges(&mated_crt_graph_brute(&w));
    }
    art.report.invariant("verify.mated_crt_fast_equals_brute", worst == 0, worst);

    let (c1, c2) = curves(cfg)?;
    let chain = stage("verify", build_chain(&c1, &c2, cfg.tm_source, true, cfg.planted, cfg.seed))?;
    let e = stage("verify", embed_chain(&chain, &c1, cfg.delta, cfg.tol))?;
    let pmax = e.max_interior_modulus();
    art.report.invariant("verify.maximum_principle", pmax < 1.0, pmax);
    art.report.invariant("verify.tutte_residual", e.embedding.residual < 1e-8, e.embedding.residual);
    Ok(())
}
