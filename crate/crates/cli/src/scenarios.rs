//! Scenario orchestration: builds instances from the configuration, runs
//! them, and emits CSV fields, JSON snapshots and the run report.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde_json::json;
use tapestry::algebra::{
    build_sequence_tree, config_pcm, evaluate, pcm, sample_path, simplify, CompatTable,
    EnumContext, PrimitiveSpec, ProcessExpr, RuleTable,
};
use tapestry::dynamics::{evolve, init_from_samples, StrategyParams};
use tapestry::interp::{global_field, process_strength, tagged_field, WaveField};
use tapestry::oracle::{
    butzer_bound, butzer_envelope, exact_free_packet, game_reference, relative_linf,
    yao_thomas_bound, ButzerParams, ErrorReport, YaoThomasParams,
};
use tapestry::tapestry::{make_lattice, CausalTapestry, Informon, Properties, SpacetimePoint};
use tapestry::{seeded_rng, LatticeSite};

use crate::config::{generations, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::parser::{parse_process_expr, print_expr};

pub struct RunArtifacts {
    pub report: serde_json::Value,
    pub pass: bool,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_field(path: &Path, field: &WaveField) -> Result<(), CliError> {
    let mut buf = Vec::new();
    field
        .write_csv(&mut buf)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    fs::write(path, buf)?;
    Ok(())
}

fn lattice_grid(params: &StrategyParams, generation: i64) -> Vec<SpacetimePoint> {
    make_lattice(params.dim, &params.extent, generation)
        .expect("validated extent")
        .iter()
        .map(|s| s.embed(params.t_p, params.l_p))
        .collect()
}

fn windowed(grid: &[SpacetimePoint], window: Option<f64>) -> Vec<SpacetimePoint> {
    match window {
        None => grid.to_vec(),
        Some(w) => grid
            .iter()
            .filter(|z| z.x.iter().all(|x| x.abs() <= w + 1e-12))
            .cloned()
            .collect(),
    }
}

fn report_skeleton(cfg: &ScenarioConfig, command: &str) -> serde_json::Value {
    json!({
        "schema_version": 1,
        "command": command,
        "scenario": cfg.scenario.name(),
        "seed": cfg.seed,
        "params": {
            "t_p": cfg.params.t_p,
            "l_p": cfg.params.l_p,
            "dim": cfg.params.dim,
            "extent": cfg.params.extent,
            "mass": cfg.params.mass,
            "hbar": cfg.params.hbar,
            "delta": if cfg.params.delta.is_finite() { json!(cfg.params.delta) } else { json!("inf") },
            "boundary": format!("{:?}", cfg.params.boundary),
            "band_limit": cfg.params.band_limit,
            "sigma0": cfg.packet.sigma0,
            "x0": cfg.packet.x0,
            "k0": cfg.packet.k0,
            "tolerance": cfg.run.tolerance,
        },
    })
}

/// Evolves the configured packet, writing per-generation fields and
/// snapshots; returns the final-generation relative Linf error against the
/// phase-frame reference.
pub fn run_evolve(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let sites0 = make_lattice(cfg.params.dim, &cfg.params.extent, 0)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let packet = cfg.packet.clone();
    let t0 = init_from_samples(
        |z| exact_free_packet(&packet, &z.x, z.t).expect("validated packet"),
        &sites0,
        "P",
        &cfg.params,
    )
    .map_err(|e| CliError::Engine(e.to_string()))?;
    let mut rng = seeded_rng(cfg.seed);
    let gens = generations(cfg);
    let history =
        evolve(&t0, gens, &cfg.params, &mut rng).map_err(|e| CliError::Engine(e.to_string()))?;

    let mut errors = Vec::new();
    for (k, tapestry) in history.iter().enumerate() {
        let grid = lattice_grid(&cfg.params, tapestry.generation());
        let field = global_field(tapestry, &grid, &cfg.params)
            .map_err(|e| CliError::Engine(e.to_string()))?;
        write_field(&out.join(format!("field_gen{k}.csv")), &field)?;
        write_json(
            &out.join(format!("tapestry_gen{k}.json")),
            &tapestry.snapshot(),
        )?;
        let wgrid = windowed(&grid, cfg.run.window);
        let wfield = global_field(tapestry, &wgrid, &cfg.params)
            .map_err(|e| CliError::Engine(e.to_string()))?;
        let err = relative_linf(&wfield, |z| {
            game_reference(&packet, &cfg.params, &z.x, z.t).expect("validated packet")
        })
        .map_err(|e| CliError::Engine(e.to_string()))?;
        errors.push(err);
    }
    let final_err = *errors.last().unwrap();
    let strength = process_strength(history.last().unwrap(), &cfg.params);
    let pass = final_err <= cfg.run.tolerance;
    let mut report = report_skeleton(cfg, "evolve");
    report["metrics"] = json!({
        "relative_linf_per_generation": errors,
        "final_relative_linf": final_err,
        "final_process_strength": strength,
    });
    report["outputs"] = json!((0..history.len())
        .map(|k| format!("field_gen{k}.csv"))
        .collect::<Vec<_>>());
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

/// The free-packet scenario: one run, plus an optional spatial refinement
/// sweep (t_P fixed, l_P halved per level) whose errors must decrease.
pub fn scenario_free_packet(
    cfg: &ScenarioConfig,
    out: &Path,
    refine: usize,
) -> Result<RunArtifacts, CliError> {
    let base = run_evolve(cfg, out)?;
    if refine == 0 {
        return Ok(base);
    }
    let mut levels = vec![json!({
        "level": 0,
        "l_p": cfg.params.l_p,
        "t_p": cfg.params.t_p,
        "relative_linf": base.report["metrics"]["final_relative_linf"],
    })];
    let mut errors = vec![base.report["metrics"]["final_relative_linf"]
        .as_f64()
        .unwrap()];
    let half_width = cfg.params.extent[0] as f64 * cfg.params.l_p / 2.0;
    for level in 1..=refine {
        let l_p = cfg.params.l_p / 2f64.powi(level as i32);
        let mut params = cfg.params.clone();
        params.l_p = l_p;
        params.band_limit = std::f64::consts::PI / l_p;
        params.extent = vec![(2.0 * half_width / l_p).round() as i64 + 1];
        let sub = ScenarioConfig {
            params,
            ..cfg.clone()
        };
        let level_out = out.join(format!("level{level}"));
        let artifacts = run_evolve(&sub, &level_out)?;
        let err = artifacts.report["metrics"]["final_relative_linf"]
            .as_f64()
            .unwrap();
        levels.push(json!({
            "level": level,
            "l_p": l_p,
            "t_p": cfg.params.t_p,
            "relative_linf": err,
        }));
        errors.push(err);
    }
    // Strictly decreasing until the error sits at the float floor.
    let monotone = errors.windows(2).all(|w| w[0] > w[1] || w[1] <= 1e-12);
    let pass = monotone && *errors.last().unwrap() <= cfg.run.tolerance;
    let mut report = report_skeleton(cfg, "scenario");
    report["metrics"] = json!({
        "refinement_levels": levels,
        "strictly_decreasing": monotone,
        "final_relative_linf": errors.last().unwrap(),
    });
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

type TaggedSampler<'a> = (&'a str, Box<dyn Fn(&SpacetimePoint) -> Complex64>);

fn combined_initial(
    cfg: &ScenarioConfig,
    parts: &[TaggedSampler],
) -> Result<CausalTapestry, CliError> {
    let sites = make_lattice(cfg.params.dim, &cfg.params.extent, 0)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let mut t0 = CausalTapestry::new(0);
    for (tag, sample) in parts {
        for site in &sites {
            let z = site.embed(cfg.params.t_p, cfg.params.l_p);
            let strength = sample(&z);
            if strength.norm_sqr() == 0.0 {
                continue;
            }
            let props = Properties {
                potential: cfg.params.potential.value(site, cfg.params.l_p),
                ..Properties::default()
            };
            t0.insert_informon(Informon::new(site.clone(), tag, strength, props))
                .map_err(|e| CliError::Engine(e.to_string()))?;
        }
    }
    t0.seal();
    Ok(t0)
}

/// Superposition of two packet states of one process under the exclusive
/// sum: the combined field decomposes exactly into the weighted per-state
/// fields, and each state tracks its own reference.
pub fn scenario_superposition(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let packet_a = cfg.packet.clone();
    let mut packet_b = cfg.packet.clone();
    packet_b.k0 = packet_b.k0.iter().map(|k| -k).collect();
    packet_b.x0 = packet_b.x0.iter().map(|x| -x).collect();

    let pa = packet_a.clone();
    let pb = packet_b.clone();
    let t0 = combined_initial(
        cfg,
        &[
            (
                "P1",
                Box::new(move |z| exact_free_packet(&pa, &z.x, z.t).unwrap()),
            ),
            (
                "P2",
                Box::new(move |z| exact_free_packet(&pb, &z.x, z.t).unwrap()),
            ),
        ],
    )?;

    let expr = ProcessExpr::SumExcl(vec![
        ProcessExpr::Primitive(PrimitiveSpec::new("P1").drawing_from(&["P1"])).scaled(w),
        ProcessExpr::Primitive(PrimitiveSpec::new("P2").drawing_from(&["P2"])).scaled(w),
    ]);
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&cfg.params, &rules);
    let mut rng = seeded_rng(cfg.seed);
    let mut current = t0;
    let gens = generations(cfg);
    let mut decomposition_err: f64 = 0.0;
    let mut state_errors = Vec::new();
    for k in 1..=gens {
        current = evaluate(&expr, &current, &ctx, &mut rng).map_err(CliError::from_algebra)?;
        let grid = lattice_grid(&cfg.params, current.generation());
        let field = global_field(&current, &grid, &cfg.params)
            .map_err(|e| CliError::Engine(e.to_string()))?;
        let f1 = tagged_field(&current, &grid, &cfg.params, "P1")
            .map_err(|e| CliError::Engine(e.to_string()))?;
        let f2 = tagged_field(&current, &grid, &cfg.params, "P2")
            .map_err(|e| CliError::Engine(e.to_string()))?;
        let recomposed = f1.add(&f2).map_err(|e| CliError::Engine(e.to_string()))?;
        decomposition_err = decomposition_err.max(
            field
                .linf_diff(&recomposed)
                .map_err(|e| CliError::Engine(e.to_string()))?,
        );
        write_field(&out.join(format!("field_gen{k}.csv")), &field)?;
        write_field(&out.join(format!("field_gen{k}_P1.csv")), &f1)?;
        write_field(&out.join(format!("field_gen{k}_P2.csv")), &f2)?;
        write_json(
            &out.join(format!("tapestry_gen{k}.json")),
            &current.snapshot(),
        )?;
        if k == gens {
            let wgrid = windowed(&grid, cfg.run.window);
            let wf1 = tagged_field(&current, &wgrid, &cfg.params, "P1")
                .map_err(|e| CliError::Engine(e.to_string()))?;
            let wf2 = tagged_field(&current, &wgrid, &cfg.params, "P2")
                .map_err(|e| CliError::Engine(e.to_string()))?;
            let pa = packet_a.clone();
            let params = cfg.params.clone();
            let e1 = relative_linf(&wf1, move |z| {
                w * game_reference(&pa, &params, &z.x, z.t).unwrap()
            })
            .map_err(|e| CliError::Engine(e.to_string()))?;
            let pb = packet_b.clone();
            let params = cfg.params.clone();
            let e2 = relative_linf(&wf2, move |z| {
                w * game_reference(&pb, &params, &z.x, z.t).unwrap()
            })
            .map_err(|e| CliError::Engine(e.to_string()))?;
            state_errors = vec![e1, e2];
        }
    }
    let pass = decomposition_err <= 1e-12
        && state_errors.iter().all(|e| *e <= cfg.run.tolerance);
    let mut report = report_skeleton(cfg, "scenario");
    report["metrics"] = json!({
        "decomposition_linf": decomposition_err,
        "state_relative_linf": state_errors,
    });
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

/// Two-slit free sum: both slit subprocesses restrict the same state, so
/// their contributions merge and the emitted intensity carries the
/// non-additive interference term.
pub fn scenario_two_slit(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let slits = cfg.slits.as_ref().expect("validated");
    let (l0, l1) = (slits.left[0], slits.left[1]);
    let (r0, r1) = (slits.right[0], slits.right[1]);
    let t0 = combined_initial(
        cfg,
        &[
            (
                "L",
                Box::new(move |z: &SpacetimePoint| {
                    if z.x[0] >= l0 && z.x[0] <= l1 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }),
            ),
            (
                "R",
                Box::new(move |z: &SpacetimePoint| {
                    if z.x[0] >= r0 && z.x[0] <= r1 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                }),
            ),
        ],
    )?;
    if t0.is_empty() {
        return Err(CliError::Config(
            "slit windows are empty on this lattice".to_string(),
        ));
    }
    let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let expr = ProcessExpr::SumFree(vec![
        ProcessExpr::Primitive(PrimitiveSpec::new("L").drawing_from(&["L"])).scaled(w),
        ProcessExpr::Primitive(PrimitiveSpec::new("R").drawing_from(&["R"])).scaled(w),
    ]);
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&cfg.params, &rules);
    let mut rng = seeded_rng(cfg.seed);
    let screen = evaluate(&expr, &t0, &ctx, &mut rng).map_err(CliError::from_algebra)?;

    let grid = lattice_grid(&cfg.params, screen.generation());
    let field =
        global_field(&screen, &grid, &cfg.params).map_err(|e| CliError::Engine(e.to_string()))?;
    let f_l = tagged_field(&screen, &grid, &cfg.params, "L")
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let f_r = tagged_field(&screen, &grid, &cfg.params, "R")
        .map_err(|e| CliError::Engine(e.to_string()))?;
    write_field(&out.join("field.csv"), &field)?;
    write_field(&out.join("field_L.csv"), &f_l)?;
    write_field(&out.join("field_R.csv"), &f_r)?;
    write_json(&out.join("tapestry_gen1.json"), &screen.snapshot())?;

    // |Phi|^2 - |Phi_L|^2 - |Phi_R|^2 = 2 Re(conj(Phi_L) Phi_R), pointwise.
    let mut identity_err: f64 = 0.0;
    let mut max_cross: f64 = 0.0;
    for i in 0..field.len() {
        let cross = 2.0 * (f_l.values[i].conj() * f_r.values[i]).re;
        let lhs = field.values[i].norm_sqr() - f_l.values[i].norm_sqr() - f_r.values[i].norm_sqr();
        identity_err = identity_err.max((lhs - cross).abs());
        max_cross = max_cross.max(cross.abs());
    }
    let pass = identity_err <= 1e-10 && max_cross > 1e-9;
    let mut report = report_skeleton(cfg, "scenario");
    report["metrics"] = json!({
        "interference_identity_linf": identity_err,
        "max_cross_term": max_cross,
        "interference_present": max_cross > 1e-9,
    });
    report["outputs"] = json!(["field.csv", "field_L.csv", "field_R.csv"]);
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

fn zero_hop_delta(params: &StrategyParams) -> f64 {
    let one_hop = (params.t_p * params.t_p + params.l_p * params.l_p).sqrt();
    (params.t_p + one_hop) / 2.0
}

fn two_hop_delta(params: &StrategyParams) -> f64 {
    let two_hop = (params.t_p * params.t_p + 4.0 * params.l_p * params.l_p).sqrt();
    let three_hop = (params.t_p * params.t_p + 9.0 * params.l_p * params.l_p).sqrt();
    (two_hop + three_hop) / 2.0
}

/// Entanglement: two particles with two states each, paired interactively.
/// Full enumeration of a one-site-per-state instance; the configuration
/// field vanishes on every cross-paired tuple.
pub fn scenario_entanglement(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    if cfg.params.dim != 1 || cfg.params.extent[0] < 4 {
        return Err(CliError::Config(
            "entanglement scenario needs a 1-D extent of at least 4".to_string(),
        ));
    }
    let mut params = cfg.params.clone();
    params.delta = zero_hop_delta(&params); // each state reproduces its own site
    let mut t0 = CausalTapestry::new(0);
    let assignments = [(-2i64, "A0"), (-1, "A1"), (0, "B0"), (1, "B1")];
    for (coord, tag) in assignments {
        t0.insert_informon(Informon::new(
            LatticeSite::new(0, vec![coord]),
            tag,
            Complex64::new(1.0, 0.0),
            Properties::default(),
        ))
        .map_err(|e| CliError::Engine(e.to_string()))?;
    }
    t0.seal();
    let factor = |s0: &str, s1: &str| {
        ProcessExpr::SumExcl(vec![
            ProcessExpr::Primitive(PrimitiveSpec::new(s0).with_state("0").drawing_from(&[s0])),
            ProcessExpr::Primitive(PrimitiveSpec::new(s1).with_state("1").drawing_from(&[s1])),
        ])
    };
    let expr = ProcessExpr::ProdInter(
        vec![factor("A0", "A1"), factor("B0", "B1")],
        "pairing".to_string(),
    )
    .scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let rules = RuleTable::builtin();
    let mut ctx = EnumContext::new(&params, &rules);
    if let Some(cap) = cfg.run.path_cap {
        ctx.path_cap = cap;
    }
    let site = |c: i64| LatticeSite::new(1, vec![c]).embed(params.t_p, params.l_p);
    let grid_a = vec![site(-2), site(-1)];
    let grid_b = vec![site(0), site(1)];
    let set = config_pcm(&expr, &t0, 1, &[grid_a.clone(), grid_b.clone()], &ctx)
        .map_err(CliError::from_algebra)?;

    let enumeration = build_sequence_tree(&expr, &t0, 1, &ctx).map_err(CliError::from_algebra)?;
    fs::write(out.join("sequence_tree.dot"), enumeration.tree.to_dot())?;

    // Cross tuples: (A0 site, B1 site) and (A1 site, B0 site).
    let mut cross_max: f64 = 0.0;
    let mut paired_min = f64::MAX;
    for field in &set.fields {
        cross_max = cross_max.max(field.value_at(&[0, 1]).norm());
        cross_max = cross_max.max(field.value_at(&[1, 0]).norm());
        paired_min = paired_min.min(field.value_at(&[0, 0]).norm());
        paired_min = paired_min.min(field.value_at(&[1, 1]).norm());
    }
    // Configuration field CSV: x1, x2, re, im, abs2.
    let mut csv = String::from("x1,x2,re,im,abs2\n");
    for (field_idx, field) in set.fields.iter().enumerate() {
        let _ = field_idx;
        for (i, za) in grid_a.iter().enumerate() {
            for (j, zb) in grid_b.iter().enumerate() {
                let v = field.value_at(&[i, j]);
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    za.x[0],
                    zb.x[0],
                    v.re,
                    v.im,
                    v.norm_sqr()
                ));
            }
        }
    }
    fs::write(out.join("config_field.csv"), csv)?;

    let pass = cross_max <= 1e-14 && paired_min > 1e-6 && set.len() == 1;
    let mut report = report_skeleton(cfg, "scenario");
    report["metrics"] = json!({
        "field_count": set.len(),
        "max_cross_pair_amplitude": cross_max,
        "min_paired_amplitude": paired_min,
    });
    report["outputs"] = json!(["config_field.csv", "sequence_tree.dot"]);
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

/// Schroedinger-cat interactive sum: seeded sampled histories must never
/// transition from the dead branch back to the alive branch.
pub fn scenario_cat(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    if cfg.params.dim != 1 || cfg.params.extent[0] < 8 {
        return Err(CliError::Config(
            "cat scenario needs a 1-D extent of at least 8".to_string(),
        ));
    }
    let mut params = cfg.params.clone();
    params.delta = two_hop_delta(&params);
    let mut t0 = CausalTapestry::new(0);
    for (coord, tag) in [(-2i64, "Dn"), (-1, "Dr"), (0, "Ca"), (1, "Cd")] {
        t0.insert_informon(Informon::new(
            LatticeSite::new(0, vec![coord]),
            tag,
            Complex64::new(1.0, 0.0),
            Properties::default(),
        ))
        .map_err(|e| CliError::Engine(e.to_string()))?;
    }
    t0.seal();
    let expr = ProcessExpr::SumInter(
        vec![
            ProcessExpr::ProdExcl(vec![
                ProcessExpr::Primitive(PrimitiveSpec::new("Dn").drawing_from(&["Dn"])),
                ProcessExpr::Primitive(PrimitiveSpec::new("Ca").drawing_from(&["Ca"])),
            ]),
            ProcessExpr::ProdExcl(vec![
                ProcessExpr::Primitive(PrimitiveSpec::new("Dr").drawing_from(&["Dr"])),
                ProcessExpr::Primitive(PrimitiveSpec::new("Cd").drawing_from(&["Cd"])),
            ]),
        ],
        "cat".to_string(),
    )
    .scaled(Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&params, &rules);

    let rounds = cfg.run.rounds.max(2);
    let mut dead_to_alive = 0usize;
    let mut alive_to_dead = 0usize;
    let mut stayed_alive = 0usize;
    let mut logs = Vec::with_capacity(cfg.run.runs);
    for i in 0..cfg.run.runs {
        let mut rng = seeded_rng(cfg.seed.wrapping_add(i as u64));
        let outcome =
            sample_path(&expr, &t0, rounds, &ctx, &mut rng).map_err(CliError::from_algebra)?;
        let mut dead = false;
        for &b in &outcome.branch_log {
            if dead && b == 0 {
                dead_to_alive += 1;
            }
            if !dead && b == 1 {
                alive_to_dead += 1;
            }
            dead |= b == 1;
        }
        if !dead {
            stayed_alive += 1;
        }
        logs.push(outcome.branch_log);
    }
    write_json(
        &out.join("transitions.json"),
        &json!({
            "runs": cfg.run.runs,
            "rounds_per_run": rounds,
            "branch_logs": logs,
        }),
    )?;
    let pass = dead_to_alive == 0;
    let mut report = report_skeleton(cfg, "scenario");
    report["metrics"] = json!({
        "runs": cfg.run.runs,
        "dead_to_alive_transitions": dead_to_alive,
        "alive_to_dead_transitions": alive_to_dead,
        "runs_stayed_alive": stayed_alive,
    });
    report["outputs"] = json!(["transitions.json"]);
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

fn bind_primitives(expr: &ProcessExpr, table: &[PrimitiveSpec]) -> ProcessExpr {
    match expr {
        ProcessExpr::Primitive(p) => {
            let bound = table
                .iter()
                .find(|s| s.id == p.id)
                .cloned()
                .unwrap_or_else(|| p.clone());
            ProcessExpr::Primitive(bound)
        }
        ProcessExpr::Zero => ProcessExpr::Zero,
        ProcessExpr::Scalar(w, e) => ProcessExpr::Scalar(*w, Box::new(bind_primitives(e, table))),
        ProcessExpr::SumExcl(cs) => {
            ProcessExpr::SumExcl(cs.iter().map(|c| bind_primitives(c, table)).collect())
        }
        ProcessExpr::SumFree(cs) => {
            ProcessExpr::SumFree(cs.iter().map(|c| bind_primitives(c, table)).collect())
        }
        ProcessExpr::SumInter(cs, r) => ProcessExpr::SumInter(
            cs.iter().map(|c| bind_primitives(c, table)).collect(),
            r.clone(),
        ),
        ProcessExpr::ProdExcl(cs) => {
            ProcessExpr::ProdExcl(cs.iter().map(|c| bind_primitives(c, table)).collect())
        }
        ProcessExpr::ProdFree(cs) => {
            ProcessExpr::ProdFree(cs.iter().map(|c| bind_primitives(c, table)).collect())
        }
        ProcessExpr::ProdInter(cs, r) => ProcessExpr::ProdInter(
            cs.iter().map(|c| bind_primitives(c, table)).collect(),
            r.clone(),
        ),
        ProcessExpr::Concat(l, r) => ProcessExpr::Concat(
            Box::new(bind_primitives(l, table)),
            Box::new(bind_primitives(r, table)),
        ),
    }
}

/// Custom expression: parse, bind, simplify, enumerate the covering map.
pub fn scenario_custom(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let text = cfg.expr_text.as_ref().expect("validated");
    let rules = RuleTable::builtin();
    let parsed = parse_process_expr(text, &rules)?;
    let bound = bind_primitives(&parsed, &cfg.primitives);
    let normal = simplify(&bound, &CompatTable::default(), &rules).map_err(CliError::from_algebra)?;

    let packet = cfg.packet.clone();
    let sites0 = make_lattice(cfg.params.dim, &cfg.params.extent, 0)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let t0 = init_from_samples(
        |z| exact_free_packet(&packet, &z.x, z.t).expect("validated"),
        &sites0,
        "seed",
        &cfg.params,
    )
    .map_err(|e| CliError::Engine(e.to_string()))?;

    let mut ctx = EnumContext::new(&cfg.params, &rules);
    if let Some(cap) = cfg.run.path_cap {
        ctx.path_cap = cap;
    }
    if let Some(budget) = cfg.run.site_budget {
        ctx.site_budget = budget;
    }
    let grid = lattice_grid(&cfg.params, 1);
    let set = pcm(&normal, &t0, cfg.run.rounds, &grid, &ctx).map_err(CliError::from_algebra)?;
    let enumeration =
        build_sequence_tree(&normal, &t0, cfg.run.rounds, &ctx).map_err(CliError::from_algebra)?;
    fs::write(out.join("sequence_tree.dot"), enumeration.tree.to_dot())?;
    let mut outputs = vec!["sequence_tree.dot".to_string()];
    for (i, field) in set.fields.iter().enumerate() {
        let name = format!("field_{i}.csv");
        write_field(&out.join(&name), field)?;
        outputs.push(name);
    }
    let mut report = report_skeleton(cfg, "pcm");
    report["metrics"] = json!({
        "expression": text,
        "normal_form": print_expr(&normal),
        "complete_paths": enumeration.outcomes.len(),
        "stalled_paths": enumeration.tree.stalled_paths,
        "distinct_fields": set.len(),
    });
    report["outputs"] = json!(outputs);
    report["pass"] = json!(true);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts {
        report,
        pass: true,
    })
}

/// Cardinal-series reconstruction of the configured packet: exact at the
/// samples, within truncation error at off-lattice points.
pub fn run_reconstruct(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let packet = cfg.packet.clone();
    let sites = make_lattice(cfg.params.dim, &cfg.params.extent, 0)
        .map_err(|e| CliError::Engine(e.to_string()))?;
    let samples: Vec<Complex64> = sites
        .iter()
        .map(|s| {
            let z = s.embed(cfg.params.t_p, cfg.params.l_p);
            exact_free_packet(&packet, &z.x, z.t).expect("validated")
        })
        .collect();

    // Exactness at sample points.
    let mut sample_err: f64 = 0.0;
    for (site, sample) in sites.iter().zip(&samples).step_by(7) {
        let z = site.embed(cfg.params.t_p, cfg.params.l_p);
        let v = tapestry::interp::parzen_reconstruct(&samples, &sites, &z, &cfg.params)
            .map_err(|e| CliError::Engine(e.to_string()))?;
        sample_err = sample_err.max((v - sample).norm());
    }

    // Off-lattice reconstruction on a refined grid within the window.
    let refine = 8usize;
    let window = cfg.run.window.unwrap_or(
        cfg.params.extent[0] as f64 * cfg.params.l_p / 4.0,
    );
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut off_err: f64 = 0.0;
    let steps = (2.0 * window / (cfg.params.l_p / refine as f64)).round() as i64;
    for i in 0..=steps {
        let x = -window + i as f64 * (cfg.params.l_p / refine as f64);
        let z = SpacetimePoint::new(0.0, vec![x]);
        let v = tapestry::interp::parzen_reconstruct(&samples, &sites, &z, &cfg.params)
            .map_err(|e| CliError::Engine(e.to_string()))?;
        let reference = exact_free_packet(&packet, &z.x, z.t).expect("validated");
        off_err = off_err.max((v - reference).norm());
        grid.push(z);
        values.push(v);
    }
    let field = WaveField {
        grid,
        values,
        t_p: cfg.params.t_p,
        l_p: cfg.params.l_p,
        dim: cfg.params.dim,
    };
    write_field(&out.join("reconstruction.csv"), &field)?;

    let pass = sample_err <= 1e-12 && off_err <= cfg.run.tolerance;
    let mut report = report_skeleton(cfg, "reconstruct");
    report["metrics"] = json!({
        "sample_point_linf": sample_err,
        "off_lattice_linf": off_err,
        "terms_per_side": (sites.len() - 1) / 2,
    });
    report["outputs"] = json!(["reconstruction.csv"]);
    report["pass"] = json!(pass);
    write_json(&out.join("report.json"), &report)?;
    Ok(RunArtifacts { report, pass })
}

fn numeric_sup<F: Fn(f64) -> f64>(f: F, half_width: f64, n: usize) -> f64 {
    (0..=n)
        .map(|i| {
            let x = -half_width + 2.0 * half_width * i as f64 / n as f64;
            f(x)
        })
        .fold(0.0, f64::max)
}

/// Evaluates the published interpolation error bounds at the configured
/// parameters, checks the two order-of-magnitude anchors, and verifies a
/// measured desk-scale run sits below the bound.
pub fn run_bounds(cfg: &ScenarioConfig, out: &Path) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out)?;
    let packet = cfg.packet.clone();
    let defaults = cfg.bounds.clone();
    // Packet magnitudes, computed numerically unless supplied.
    let psi_sup = defaults
        .as_ref()
        .and_then(|b| b.psi_sup)
        .unwrap_or_else(|| {
            numeric_sup(
                |x| exact_free_packet(&packet, &[x], 0.0).unwrap().norm(),
                12.0,
                4000,
            )
        });
    let psi_deriv_sup = defaults
        .as_ref()
        .and_then(|b| b.psi_deriv_sup)
        .unwrap_or_else(|| {
            let h = 1e-5;
            numeric_sup(
                |x| {
                    ((exact_free_packet(&packet, &[x + h], 0.0).unwrap()
                        - exact_free_packet(&packet, &[x - h], 0.0).unwrap())
                        / (2.0 * h))
                        .norm()
                },
                12.0,
                4000,
            )
        });
    let envelope_m = defaults
        .as_ref()
        .map(|b| b.envelope_m)
        .unwrap_or(1.0)
        .max(numeric_sup(
            |x| x.abs() * exact_free_packet(&packet, &[x], 0.0).unwrap().norm(),
            12.0,
            4000,
        ));
    let gamma = defaults.as_ref().map(|b| b.gamma).unwrap_or(1.0);
    let butzer = ButzerParams {
        gamma,
        psi_sup,
        psi_deriv_sup,
        envelope_m,
        eps_over_lp: defaults.as_ref().and_then(|b| b.eps_over_lp).unwrap_or(0.0),
        delta_over_lp: defaults
            .as_ref()
            .and_then(|b| b.delta_over_lp)
            .unwrap_or(0.0),
        l_p: cfg.params.l_p,
        band_w: defaults.as_ref().and_then(|b| b.band_w),
        truncation_r: None,
    };
    let desk_bound = butzer_bound(&butzer).map_err(|e| CliError::Engine(e.to_string()))?;

    // Measured desk-scale error from a one-generation run.
    let evolve_out = out.join("desk_run");
    let measured = run_evolve(cfg, &evolve_out)?;
    let measured_abs = measured.report["metrics"]["final_relative_linf"]
        .as_f64()
        .unwrap()
        * psi_sup;

    // Published anchors.
    const PLANCK_LENGTH: f64 = 1.616_255e-35;
    let planck_envelope =
        butzer_envelope(PLANCK_LENGTH).map_err(|e| CliError::Engine(e.to_string()))?;
    let yao = yao_thomas_bound(&YaoThomasParams {
        psi_max: defaults.as_ref().and_then(|b| b.psi_max).unwrap_or(1.0),
        c_abs: defaults.as_ref().and_then(|b| b.c_abs).unwrap_or(2.998e8),
    })
    .map_err(|e| CliError::Engine(e.to_string()))?;
    let planck_ok = (0.65e-33..=2.6e-33).contains(&planck_envelope);
    let yao_ok = (0.6e-27..=2.4e-27).contains(&yao);
    let within_bound = measured_abs <= desk_bound;
    let pass = planck_ok && yao_ok && within_bound;

    let entries = [
        ErrorReport {
            metric: "butzer_bound_desk_scale".to_string(),
            value: measured_abs,
            bound: Some(desk_bound),
            params: json!({
                "gamma": gamma,
                "psi_sup": psi_sup,
                "psi_deriv_sup": psi_deriv_sup,
                "envelope_m": envelope_m,
                "l_p": cfg.params.l_p,
            }),
            pass: within_bound,
        },
        ErrorReport {
            metric: "butzer_envelope_planck".to_string(),
            value: planck_envelope,
            bound: Some(1.3e-33),
            params: json!({ "l_p": PLANCK_LENGTH }),
            pass: planck_ok,
        },
        ErrorReport {
            metric: "yao_thomas".to_string(),
            value: yao,
            bound: Some(1.2e-27),
            params: json!({ "psi_max": 1.0, "c_abs": 2.998e8 }),
            pass: yao_ok,
        },
    ];
    let report_value = json!({
        "schema_version": 1,
        "command": "bounds",
        "metrics": entries.iter().map(|e| e.to_json()).collect::<Vec<_>>(),
        "pass": pass,
    });
    write_json(&out.join("bounds.json"), &report_value)?;
    Ok(RunArtifacts {
        report: report_value,
        pass,
    })
}

/// Dispatches the configured scenario.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out: &Path,
    refine: usize,
) -> Result<RunArtifacts, CliError> {
    match cfg.scenario {
        Scenario::FreePacket => scenario_free_packet(cfg, out, refine),
        Scenario::Superposition => scenario_superposition(cfg, out),
        Scenario::TwoSlit => scenario_two_slit(cfg, out),
        Scenario::Entanglement => scenario_entanglement(cfg, out),
        Scenario::Cat => scenario_cat(cfg, out),
        Scenario::Custom => scenario_custom(cfg, out),
    }
}
