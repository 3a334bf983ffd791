//! Dispatch from a validated configuration to the numerical modules.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::json;

use crate::error::{Error, Result};
use crate::norms::{estimate_ratio, l6_l2_displayed_exponent, sobolev_norm, Exponent};
use crate::phase::{validate_condition1, ConditionReport, PhaseFunction, DEFAULT_TOL};
use crate::pipeline::{corollary_scan, local_global_experiment, Verdict};
use crate::restriction::{build_patch, decay_directions, fit_decay, rings_for_frequency};
use crate::sparse::{
    closed_form_radius, decompose, feasible_epsilon, fiber_stratify, schedule_at, schedule_grid, EpsilonSchedule,
};
use crate::spectral::{propagate, SpatialField};
use crate::squarefn::{shell_profile, square_function_compare};

use super::battery::seeded_battery;
use super::config::{restriction_side, Experiment, ExperimentConfig};
use super::generators::{orthogonality_sweep, random_cube_set};
use super::report::{fmt17, unix_now, Collector, ReportRecord};

const SPHERE_SAMPLES: usize = 512;
const DEFAULT_LAYERS: u32 = 2;
const DEFAULT_C_DELTA: f64 = 1.0;
const DEFAULT_DEPTH: u32 = 64;
/// Relative `L²` drift of the propagator treated as an oracle failure.
const UNITARITY_TOL: f64 = 1e-10;

/// Validates `config`, runs its experiment and writes the artifacts into `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<ReportRecord> {
    config.validate()?;
    let started = unix_now();
    let mut c = Collector::new(out)?;
    match config.experiment {
        Experiment::ValidatePhase => validate_phase(config, &mut c)?,
        Experiment::Propagate => propagate_field(config, &mut c)?,
        Experiment::Norms => norms(config, &mut c)?,
        Experiment::Squarefn => squarefn(config, &mut c)?,
        Experiment::Ddecay => ddecay(config, &mut c)?,
        Experiment::Orthogonality => orthogonality(config, &mut c)?,
        Experiment::SparseDecompose => sparse_decompose(config, &mut c)?,
        Experiment::Stratify => stratify(config, &mut c)?,
        Experiment::Schedule => schedule(config, &mut c)?,
        Experiment::Scan => scan(config, &mut c)?,
        Experiment::LocalGlobal => local_global(config, &mut c)?,
    }
    Ok(c.finish(config.experiment.name(), config.hash()?, config.seed, started))
}

fn context<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation { .. } | Error::Assertion(_) | Error::Io(_) => e,
        other => Error::Numeric(format!("{what}: {other}")),
    })
}

fn condition(phase: &PhaseFunction) -> Result<ConditionReport> {
    validate_condition1(phase, SPHERE_SAMPLES, DEFAULT_TOL)
}

/// `γ` from the configuration override, else from the phase, else 2.
fn gamma(config: &ExperimentConfig) -> Result<f64> {
    if let Some(g) = config.sparse.as_ref().and_then(|s| s.gamma) {
        return Ok(g);
    }
    if config.phase.is_some() {
        return condition(&config.phase_function()?)?
            .gamma
            .ok_or_else(|| Error::validation("sparse.gamma", "the phase does not determine γ; set it explicitly"));
    }
    Ok(2.0)
}

fn layers(config: &ExperimentConfig) -> u32 {
    config.sparse.as_ref().and_then(|s| s.k_layers).unwrap_or(DEFAULT_LAYERS)
}

fn c_delta(config: &ExperimentConfig) -> f64 {
    config.sparse.as_ref().and_then(|s| s.c_delta).unwrap_or(DEFAULT_C_DELTA)
}

fn battery(config: &ExperimentConfig) -> Result<Vec<(String, SpatialField)>> {
    let lattice = config.grid.as_ref().expect("validated").lattice()?;
    seeded_battery(config.seed, config.battery_id(), lattice)
}

fn validate_phase(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let report = condition(&phase)?;
    c.write_json("condition.json", &report)?;
    c.scalar("passed", if report.passed { 1.0 } else { 0.0 });
    c.scalar("mu", report.mu);
    c.scalar("m_estimated", report.m_estimated);
    c.scalar("rho", report.rho);
    c.scalar("gamma", report.gamma.unwrap_or(f64::NAN));
    c.scalar("hessian_min_rank", report.hessian_min_rank as f64);
    c.check("degree_matches_fit", (report.m_estimated - phase.m()).abs() <= 1e-6 * phase.m().max(1.0));
    Ok(())
}

fn propagate_field(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let grid = config.grid.as_ref().expect("validated");
    let (name, f) = battery(config)?.swap_remove(0);
    let u = context("propagate", propagate(&f, &phase, grid))?;
    let norm0 = f.l2_norm();
    let mut csv = String::from("t,l2_norm\n");
    let mut drift = 0.0f64;
    for (i, t) in grid.times().into_iter().enumerate() {
        let norm = u.slice_field(i).l2_norm();
        drift = drift.max((norm - norm0).abs() / norm0);
        let _ = writeln!(csv, "{},{}", fmt17(t), fmt17(norm));
    }
    c.write("l2.csv", csv.as_bytes())?;
    let mut bytes = Vec::new();
    u.to_container().write_to(&mut bytes)?;
    c.write("field.bin", &bytes)?;
    c.write_json("propagate.json", &json!({ "profile": name, "initial_l2": norm0, "max_relative_drift": drift }))?;
    c.scalar("max_relative_drift", drift);
    c.check("unitary", drift <= UNITARITY_TOL);
    Ok(())
}

fn norms(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let grid = config.grid.as_ref().expect("validated");
    let spec = config.norm.as_ref().expect("validated");
    // the planar L⁶L² estimate has a second candidate exponent
    let displayed = (grid.n == 2 && spec.q == Exponent::int(6) && spec.r == Exponent::int(2))
        .then(|| l6_l2_displayed_exponent(phase.m()));
    let mut csv = String::from("profile,s,numerator,denominator,ratio\n");
    let mut ratios = Vec::new();
    for (name, f) in battery(config)? {
        let est = context("estimate_ratio", estimate_ratio(&f, &phase, spec, grid, None))?;
        let _ = writeln!(csv, "{name},{},{},{},{}", fmt17(est.s), fmt17(est.numerator), fmt17(est.denominator), fmt17(est.ratio));
        if let Some(s) = displayed {
            let den = sobolev_norm(&f, s, true)?;
            let _ = writeln!(csv, "{name},{},{},{},{}", fmt17(s), fmt17(est.numerator), fmt17(den), fmt17(est.numerator / den));
        }
        c.scalar(format!("ratio.{name}"), est.ratio);
        ratios.push(est.ratio);
    }
    c.write("norms.csv", csv.as_bytes())?;
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    c.scalar("ratio_max", max);
    c.scalar("ratio_min", min);
    if let Some(s) = displayed {
        c.scalar("s_displayed", s);
    }
    Ok(())
}

fn squarefn(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let grid = config.grid.as_ref().expect("validated");
    let p = config.squarefn.as_ref().expect("validated");
    let taper = p.taper.unwrap_or_default();
    let point = p.point.clone().unwrap_or_else(|| vec![0.0; grid.n]);
    let mut csv = String::from("profile,k,j,relative_energy,off_diagonal\n");
    let mut compare = String::from("profile,lhs,rhs\n");
    let (mut worst, mut capture) = (0.0f64, 1.0f64);
    for (name, f) in battery(config)? {
        let profile = context("shell_profile", shell_profile(&f, &phase, p.k, p.js.clone(), &point, grid, &taper))?;
        for i in &profile.interactions {
            let _ = writeln!(csv, "{name},{},{},{},{}", i.k, i.j, fmt17(i.relative_energy), i.off_diagonal);
            if i.off_diagonal {
                worst = worst.max(i.relative_energy);
            }
        }
        capture = capture.min(profile.band_capture);
        if let Some(spec) = &config.norm {
            let cmp = context("square_function_compare", square_function_compare(&f, &phase, &point, spec.r, grid, &taper))?;
            let _ = writeln!(compare, "{name},{},{}", fmt17(cmp.lhs), fmt17(cmp.rhs));
        }
    }
    c.write("squarefn.csv", csv.as_bytes())?;
    if config.norm.is_some() {
        c.write("square_function.csv", compare.as_bytes())?;
    }
    c.scalar("max_offdiagonal_energy", worst);
    c.scalar("min_band_capture", capture);
    Ok(())
}

fn ddecay(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let p = config.decay.as_ref().expect("validated");
    let rings = match p.rings {
        Some(r) => r,
        None => rings_for_frequency(&phase, p.r_max)?,
    };
    let patch = context("build_patch", build_patch(&phase, rings))?;
    let directions = decay_directions(phase.n() + 1, p.directions);
    let fit = context("fit_decay", fit_decay(&patch, &directions, p.r_min, p.r_max, p.count))?;
    let target = condition(&phase)?.rho;
    c.write("decay.csv", fit.to_csv().as_bytes())?;
    c.write_json("decay_fit.json", &json!({
        "rho_hat": fit.rho_hat,
        "pooled_rho_hat": fit.pooled_rho_hat,
        "direction_rho_hat": fit.direction_rho_hat,
        "target_rho": target,
        "patch": patch.summary(),
    }))?;
    c.scalar("rho_hat", fit.rho_hat);
    c.scalar("pooled_rho_hat", fit.pooled_rho_hat);
    c.scalar("target_rho", target);
    Ok(())
}

fn orthogonality(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let p = config.orthogonality.as_ref().expect("validated");
    let sweep = context("orthogonality", orthogonality_sweep(&phase, gamma(config)?, p, config.seed))?;
    let mut rows = String::from("count,lhs,rhs,ratio,cross_term,cross_envelope\n");
    for r in &sweep.rows {
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{}",
            r.count,
            fmt17(r.lhs),
            fmt17(r.rhs),
            fmt17(r.ratio),
            fmt17(r.cross_term),
            fmt17(r.cross_envelope)
        );
    }
    c.write("orthogonality.csv", rows.as_bytes())?;
    if !sweep.cross.is_empty() {
        let mut cross = String::from("separation,cross_term,cross_envelope\n");
        for r in &sweep.cross {
            let _ = writeln!(cross, "{},{},{}", fmt17(r.separation), fmt17(r.cross_term), fmt17(r.cross_envelope));
        }
        c.write("cross.csv", cross.as_bytes())?;
    }
    c.scalar("gamma", sweep.gamma);
    c.scalar("ratio_spread", sweep.ratio_spread);
    c.scalar("ratio_max", sweep.rows.iter().map(|r| r.ratio).fold(0.0, f64::max));
    if let Some(e) = sweep.cross_decay_exponent {
        c.scalar("cross_decay_exponent", e);
    }
    Ok(())
}

fn sparse_decompose(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let p = config.cubes.as_ref().expect("validated");
    let (k, g) = (layers(config), gamma(config)?);
    let e = random_cube_set(config.seed, p.dim, p.cells, &p.layout, k, g)?;
    let d = context("decompose", decompose(&e, k as usize, g))?;
    c.write("cubes.txt", e.to_text().as_bytes())?;
    c.write("decomposition.json", d.to_json()?.as_bytes())?;
    let mut layers_csv = String::from("k,radius_log2,cells,collections\n");
    for layer in &d.layers {
        let _ = writeln!(layers_csv, "{},{},{},{}", layer.k, fmt17(layer.radius.log2()), layer.cells.len(), layer.collections.len());
    }
    c.write("layers.csv", layers_csv.as_bytes())?;
    c.scalar("collection_constant", d.collection_constant);
    c.scalar("sub_net_constant", d.sub_net_constant);
    c.check("coverage_is_partition", d.coverage.len() == e.len());
    if g.fract() == 0.0 {
        let exact = d.radii.iter().enumerate().all(|(i, r)| match r.exact() {
            Some(v) => *v == closed_form_radius(e.len(), g as u32, i as u32),
            None => true,
        });
        c.check("radii_match_closed_form", exact);
    }
    Ok(())
}

fn stratify(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let p = config.cubes.as_ref().expect("validated");
    let e = random_cube_set(config.seed, p.dim, p.cells, &p.layout, layers(config), gamma(config)?)?;
    let strata = fiber_stratify(&e)?;
    let mut csv = String::from("j,cells,projection\n");
    for s in &strata {
        let _ = writeln!(csv, "{},{},{}", s.j, s.cells.len(), s.projection);
    }
    c.write("cubes.txt", e.to_text().as_bytes())?;
    c.write("strata.csv", csv.as_bytes())?;
    let total: usize = strata.iter().map(|s| s.cells.len()).sum();
    let covered = strata.iter().flat_map(|s| s.cells.cells()).all(|cell| e.contains(cell));
    c.check("strata_partition_e", total == e.len() && covered);
    c.scalar("strata", strata.len() as f64);
    Ok(())
}

fn schedule(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let p = config.schedule.as_ref().expect("validated");
    let (g, cd) = (gamma(config)?, c_delta(config));
    let depth = p.depth.unwrap_or(DEFAULT_DEPTH);
    let mut summary = serde_json::Map::new();
    let margin = match p.exponents {
        Some(e) => {
            let [q0, r0, q, r] = restriction_side(e);
            let search = feasible_epsilon(g, cd, q0, r0, q, r)?;
            if let Some(s) = &search.chosen {
                c.scalar("chosen_epsilon", s.epsilon);
                c.check("chosen_is_feasible", s.delta + s.epsilon <= search.margin);
            }
            c.scalar("margin", search.margin);
            summary.insert("restriction_exponents".into(), json!([q0, r0, q, r]));
            summary.insert("margin".into(), json!(search.margin));
            summary.insert("chosen".into(), serde_json::to_value(&search.chosen)?);
            search.margin
        }
        None => f64::NAN,
    };
    if let Some(eps) = p.epsilon {
        let s = schedule_at(eps, g, cd, margin)?;
        c.scalar("K", s.k_layers as f64);
        c.scalar("delta", s.delta);
        summary.insert("K".into(), json!(s.k_layers));
        summary.insert("schedule".into(), serde_json::to_value(&s)?);
    }
    let grid: Vec<EpsilonSchedule> = schedule_grid(g, cd, margin, depth)?;
    let mut csv = String::from("epsilon,K,delta,feasible\n");
    for s in &grid {
        let _ = writeln!(csv, "{},{},{},{}", fmt17(s.epsilon), s.k_layers, fmt17(s.delta), s.feasible);
    }
    summary.insert("gamma".into(), json!(g));
    summary.insert("c_delta".into(), json!(cd));
    c.write_json("schedule.json", &summary)?;
    c.write("schedule_grid.csv", csv.as_bytes())?;
    Ok(())
}

fn scan(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let grid = config.grid.as_ref().expect("validated");
    let p = config.scan.as_ref().expect("validated");
    let fields = battery(config)?;
    let result = context("scan", corollary_scan(&phase, grid, &fields, &p.q_grid, &p.r_grid, &p.lambdas))?;
    c.write("scan.csv", result.to_csv().as_bytes())?;
    let points: Vec<_> = result
        .points
        .iter()
        .map(|pt| {
            json!({
                "q": pt.q, "r": pt.r, "s": pt.s, "s_exact": pt.s_exact,
                "spread": pt.spread, "exponent": pt.exponent, "verdict": pt.verdict.as_str(),
            })
        })
        .collect();
    c.write_json("scan_summary.json", &json!({
        "m": result.m, "lambdas": result.lambdas, "profiles": result.profiles, "points": points,
    }))?;
    for v in [Verdict::Stable, Verdict::Inconclusive, Verdict::Growing] {
        let count = result.points.iter().filter(|pt| pt.verdict == v).count();
        c.scalar(format!("points.{}", v.as_str()), count as f64);
    }
    Ok(())
}

fn local_global(config: &ExperimentConfig, c: &mut Collector) -> Result<()> {
    let phase = config.phase_function()?;
    let grid = config.grid.as_ref().expect("validated");
    let p = config.local_global.as_ref().expect("validated");
    let fields = battery(config)?;
    let f = match &p.profile {
        Some(name) => fields
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| Error::validation("local_global.profile", format!("no profile `{name}` in the battery")))?,
        None => fields.into_iter().next().expect("non-empty battery").1,
    };
    let report = context("local_global", local_global_experiment(&f, &phase, p.q0, p.r0, p.q, p.r, grid, &p.radii))?;
    let mut csv = String::from("radius,norm,truncated\n");
    for l in &report.local {
        let _ = writeln!(csv, "{},{},{}", fmt17(l.radius), fmt17(l.norm), l.truncated);
    }
    c.write("local.csv", csv.as_bytes())?;
    c.write_json("local_global.json", &report)?;
    c.scalar("global", report.global);
    c.scalar("target", report.target);
    if let Some(g) = report.growth_exponent {
        c.scalar("growth_exponent", g);
    }
    c.check("local_bounded_by_global", report.local.iter().all(|l| l.norm <= report.global * (1.0 + 1e-12)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    #[test]
    fn validate_phase_record() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run(&cfg(r#"{"experiment": "validate-phase", "phase": {"family": "power", "n": 2, "m": 2}}"#), dir.path()).unwrap();
        assert_eq!(rec.scalar("passed"), Some(1.0));
        assert_eq!(rec.scalar("rho"), Some(1.0));
        assert_eq!(rec.scalar("gamma"), Some(2.0));
        assert!(rec.passed());
        assert!(dir.path().join("condition.json").exists());
    }

    #[test]
    fn schedule_k_is_three_at_one_sixteenth() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run(
            &cfg(r#"{"experiment": "schedule", "sparse": {"gamma": 2}, "schedule": {"epsilon": 0.0625, "exponents": [3.2, 8, 4, 10]}}"#),
            dir.path(),
        )
        .unwrap();
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("schedule.json")).unwrap()).unwrap();
        assert_eq!(summary["K"], 3);
        assert!((rec.scalar("margin").unwrap() - 0.025).abs() < 1e-15);
        assert!(rec.passed());
    }

    #[test]
    fn decomposition_runs_are_deterministic() {
        let text = r#"{"experiment": "sparse-decompose", "seed": 11, "sparse": {"K": 2, "gamma": 2},
                       "cubes": {"dim": 2, "cells": 50, "layout": {"box": {"side": 40}}}}"#;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run(&cfg(text), a.path()).unwrap();
        let rb = run(&cfg(text), b.path()).unwrap();
        assert_eq!(ra.content_version, rb.content_version);
        assert!(ra.passed(), "{:?}", ra.failed_checks());
    }

    #[test]
    fn stratify_partitions() {
        let dir = tempfile::tempdir().unwrap();
        let rec = run(
            &cfg(r#"{"experiment": "stratify", "seed": 2, "cubes": {"dim": 2, "cells": 40, "layout": {"box": {"side": 8}}}}"#),
            dir.path(),
        )
        .unwrap();
        assert!(rec.passed());
    }
}
