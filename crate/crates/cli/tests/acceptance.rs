//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line with the measured values. Tolerances are pinned in code.
//!
//! Criterion 3 (joint l_P = t_P refinement of the free packet) is
//! implemented exactly as stated and is expected to fail: the propagator's
//! chirp kernel aliases into ghost images at displacement
//! `2 pi hbar t_P / (m l_P)`, which is scale-invariant along that sweep
//! while the step count doubles, so the discrepancy grows with refinement
//! in every box/grid configuration. The convergent regimes (spatial
//! refinement at fixed t_P; time refinement under a potential at fixed
//! fine l_P) are demonstrated in the core crate's convergence tests.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use tapestry::algebra::{
    build_sequence_tree, config_pcm, pcm, sample_path, simplify, CompatTable, EnumContext,
    PrimitiveSpec, ProcessExpr, RuleTable, FIELD_TOL,
};
use tapestry::dynamics::{evolve, init_from_samples, StrategyParams};
use tapestry::interp::{global_field, parzen_reconstruct, process_strength, WaveField};
use tapestry::oracle::{
    brute_force_chain, butzer_bound, butzer_envelope, exact_free_packet, game_reference,
    relative_linf, yao_thomas_bound, ButzerParams, PacketSpec, YaoThomasParams,
};
use tapestry::tapestry::{make_lattice, CausalTapestry, Informon, Properties, SpacetimePoint};
use tapestry::{seeded_rng, LatticeSite};

fn verdict(n: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {n} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn ground_packet() -> PacketSpec {
    PacketSpec::ground(1)
}

#[test]
fn acceptance_1_brute_force_equivalence() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (sites, gens) in [(16i64, 4usize), (64, 8)] {
        let params = StrategyParams::new(1, vec![sites], 0.1, 0.1);
        let packet = ground_packet();
        let sites0 = make_lattice(1, &params.extent, 0).unwrap();
        let t0 = init_from_samples(
            |z| exact_free_packet(&packet, &z.x, z.t).unwrap(),
            &sites0,
            "p",
            &params,
        )
        .unwrap();
        let mut rng = seeded_rng(0);
        let history = evolve(&t0, gens, &params, &mut rng).unwrap();
        let initial: Vec<_> = t0.iter().map(|n| (n.site.clone(), n.strength)).collect();
        let gen_sites: Vec<_> = (1..=gens as i64)
            .map(|g| make_lattice(1, &params.extent, g).unwrap())
            .collect();
        let chain = brute_force_chain(&initial, &gen_sites, &params).unwrap();
        let last = history.last().unwrap();
        let sup = chain.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        for (site, expect) in &chain {
            let got = last.informon_at(&site.coords, "p").unwrap().strength;
            worst = worst.max((got - expect).norm() / sup);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && elapsed < 10.0;
    assert!(
        verdict(
            1,
            "brute-force chain equivalence",
            pass,
            &format!("relative error {worst:.3e}, runtime {elapsed:.2}s")
        ),
        "criterion 1 failed"
    );
}

#[test]
fn acceptance_2_parzen_reconstruction() {
    let params_small = StrategyParams::new(1, vec![129], 0.1, 0.1);
    let packet = ground_packet();
    // Exact at sample points (64 terms per side suffice for exactness).
    let sites = make_lattice(1, &[129], 0).unwrap();
    let samples: Vec<Complex64> = sites
        .iter()
        .map(|s| {
            let z = s.embed(0.1, 0.1);
            exact_free_packet(&packet, &z.x, 0.0).unwrap()
        })
        .collect();
    let mut sample_err: f64 = 0.0;
    for (site, sample) in sites.iter().zip(&samples).step_by(11) {
        let z = site.embed(0.1, 0.1);
        let v = parzen_reconstruct(&samples, &sites, &z, &params_small).unwrap();
        sample_err = sample_err.max((v - sample).norm());
    }

    // Band-limited below Nyquist, interior off-lattice points; 4096 terms
    // per side (the criterion's floor is 64).
    let params_big = StrategyParams::new(1, vec![8193], 0.1, 0.1);
    let big_sites = make_lattice(1, &[8193], 0).unwrap();
    let f = |x: f64| (std::f64::consts::PI * x / (4.0 * 0.1)).cos();
    let cos_samples: Vec<Complex64> = big_sites
        .iter()
        .map(|s| Complex64::new(f(s.coords[0] as f64 * 0.1), 0.0))
        .collect();
    let mut interior_err: f64 = 0.0;
    for &zx in &[0.0333, 0.05, 0.123, -0.377, 1.05] {
        let z = SpacetimePoint::new(0.0, vec![zx]);
        let v = parzen_reconstruct(&cos_samples, &big_sites, &z, &params_big).unwrap();
        interior_err = interior_err.max((v.re - f(zx)).abs().max(v.im.abs()));
    }
    let pass = sample_err <= 1e-12 && interior_err <= 1e-6;
    assert!(
        verdict(
            2,
            "parzen reconstruction",
            pass,
            &format!("sample-point error {sample_err:.3e}, interior error {interior_err:.3e}")
        ),
        "criterion 2 failed"
    );
}

#[test]
fn acceptance_3_convergence_to_nrqm() {
    // The literal sweep: sigma0 = 1, m = hbar = 1, t = 0.2, l_P = t_P in
    // {0.2, 0.1, 0.05}, full connectivity, fixed physical box [-8, 8].
    let start = Instant::now();
    let packet = ground_packet();
    let mut errors = Vec::new();
    for h in [0.2f64, 0.1, 0.05] {
        let extent = (2.0 * 8.0 / h).round() as i64 + 1;
        let params = StrategyParams::new(1, vec![extent], h, h);
        let sites0 = make_lattice(1, &params.extent, 0).unwrap();
        let t0 = init_from_samples(
            |z| exact_free_packet(&packet, &z.x, z.t).unwrap(),
            &sites0,
            "p",
            &params,
        )
        .unwrap();
        let generations = (0.2 / h).round() as usize;
        let mut rng = seeded_rng(0);
        let history = evolve(&t0, generations, &params, &mut rng).unwrap();
        let last = history.last().unwrap();
        let grid: Vec<SpacetimePoint> = make_lattice(1, &params.extent, last.generation())
            .unwrap()
            .iter()
            .map(|s| s.embed(params.t_p, params.l_p))
            .collect();
        let field = global_field(last, &grid, &params).unwrap();
        let err = relative_linf(&field, |z| {
            game_reference(&packet, &params, &z.x, z.t).unwrap()
        })
        .unwrap();
        errors.push(err);
    }
    let elapsed = start.elapsed().as_secs_f64();
    let decreasing = errors.windows(2).all(|w| w[0] > w[1]);
    let finest_ok = *errors.last().unwrap() <= 0.05;
    let pass = decreasing && finest_ok && elapsed < 60.0;
    verdict(
        3,
        "convergence under joint l_P = t_P refinement",
        pass,
        &format!(
            "relative Linf {errors:?}, strictly decreasing: {decreasing}, finest <= 5%: {finest_ok}, runtime {elapsed:.1}s"
        ),
    );
    assert!(
        pass,
        "criterion 3 failed as analysed: at fixed l_P = t_P the kernel's alias images sit at \
         displacement 2 pi hbar t_P / (m l_P) = 2 pi (scale-invariant along the sweep) while the \
         step count doubles per level, so the error grows with refinement; measured {errors:?}. \
         The library converges under spatial refinement at fixed t_P (see the core convergence \
         tests: errors fall to ~1e-15) and under time refinement at fixed fine l_P. See the \
         project decisions ledger for the full blocking analysis."
    );
}

#[test]
fn acceptance_4_pcm_sum_law() {
    let params = StrategyParams::new(1, vec![3], 0.1, 0.1);
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&params, &rules);
    let initial = init_from_samples(
        |_| Complex64::new(1.0, 0.0),
        &[LatticeSite::new(0, vec![0])],
        "seed",
        &params,
    )
    .unwrap();
    let grid: Vec<SpacetimePoint> = make_lattice(1, &[3], 1)
        .unwrap()
        .iter()
        .map(|s| s.embed(0.1, 0.1))
        .collect();
    let (w1, w2) = (Complex64::new(0.6, 0.2), Complex64::new(-0.3, 0.7));
    let mut results = Vec::new();
    for (name, kind) in [
        ("exclusive", ProcessExpr::SumExcl as fn(Vec<ProcessExpr>) -> ProcessExpr),
        ("free", ProcessExpr::SumFree as fn(Vec<ProcessExpr>) -> ProcessExpr),
    ] {
        let p1 = ProcessExpr::primitive("P1");
        let p2 = ProcessExpr::primitive("P2");
        let sum = kind(vec![p1.clone().scaled(w1), p2.clone().scaled(w2)]);
        let lhs = pcm(&sum, &initial, 2, &grid, &ctx).unwrap();
        let rhs = pcm(&p1, &initial, 2, &grid, &ctx)
            .unwrap()
            .scaled(w1)
            .setwise_sum(&pcm(&p2, &initial, 2, &grid, &ctx).unwrap().scaled(w2))
            .unwrap();
        results.push((name, lhs.set_eq(&rhs, FIELD_TOL), lhs.len(), rhs.len()));
    }
    let pass = results.iter().all(|(_, eq, _, _)| *eq);
    assert!(
        verdict(
            4,
            "covering-map sum law",
            pass,
            &format!(
                "{} ({} fields), {} ({} fields), pointwise tolerance 1e-12",
                results[0].0, results[0].2, results[1].0, results[1].2
            )
        ),
        "criterion 4 failed: {results:?}"
    );
}

fn read_csv_fields(path: &std::path::Path) -> Vec<(f64, f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
            // t, x, re, im, abs2
            (cols[1], cols[2], cols[3], cols[4])
        })
        .collect()
}

#[test]
fn acceptance_5_two_slit_cross_term() {
    // Runs the shipped binary and recomputes the interference identity
    // from the emitted CSVs.
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("two_slit.toml");
    std::fs::write(
        &config_path,
        r#"
scenario = "two_slit"
seed = 7

[strategy]
t_p = 0.2
l_p = 0.1
dim = 1
extent = [65]

[slits]
left = [-1.2, -0.8]
right = [0.8, 1.2]
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_tapestry"))
        .args([
            "scenario",
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "two-slit run failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let full = read_csv_fields(&out.join("field.csv"));
    let left = read_csv_fields(&out.join("field_L.csv"));
    let right = read_csv_fields(&out.join("field_R.csv"));
    let mut identity_err: f64 = 0.0;
    let mut max_cross: f64 = 0.0;
    for ((f, l), r) in full.iter().zip(&left).zip(&right) {
        let (lre, lim) = (l.1, l.2);
        let (rre, rim) = (r.1, r.2);
        let cross = 2.0 * (lre * rre + lim * rim);
        let lhs = f.3 - l.3 - r.3; // emitted abs2 columns
        identity_err = identity_err.max((lhs - cross).abs());
        max_cross = max_cross.max(cross.abs());
    }
    let pass = identity_err <= 1e-10 && max_cross > 1e-9;
    assert!(
        verdict(
            5,
            "two-slit non-Kolmogorov cross term",
            pass,
            &format!("identity error {identity_err:.3e}, max cross term {max_cross:.3e}")
        ),
        "criterion 5 failed"
    );
}

#[test]
fn acceptance_6_bound_formulas() {
    const PLANCK_LENGTH: f64 = 1.616_255e-35;
    let envelope = butzer_envelope(PLANCK_LENGTH).unwrap();
    let envelope_ok = (1.3e-33 / 2.0..=1.3e-33 * 2.0).contains(&envelope);
    let yao = yao_thomas_bound(&YaoThomasParams {
        psi_max: 1.0,
        c_abs: 2.998e8,
    })
    .unwrap();
    let yao_ok = (1.2e-27 / 2.0..=1.2e-27 * 2.0).contains(&yao);

    // Measured desk-scale error under the bound at matching parameters.
    let packet = ground_packet();
    let l_p = 0.05;
    let params = StrategyParams::new(1, vec![321], 0.2, l_p);
    let sites0 = make_lattice(1, &params.extent, 0).unwrap();
    let t0 = init_from_samples(
        |z| exact_free_packet(&packet, &z.x, z.t).unwrap(),
        &sites0,
        "p",
        &params,
    )
    .unwrap();
    let mut rng = seeded_rng(0);
    let history = evolve(&t0, 1, &params, &mut rng).unwrap();
    let grid: Vec<SpacetimePoint> = make_lattice(1, &params.extent, 1)
        .unwrap()
        .iter()
        .map(|s| s.embed(params.t_p, params.l_p))
        .collect();
    let field = global_field(history.last().unwrap(), &grid, &params).unwrap();
    let mut measured: f64 = 0.0;
    for (z, v) in field.grid.iter().zip(&field.values) {
        let r = game_reference(&packet, &params, &z.x, z.t).unwrap();
        measured = measured.max((v - r).norm());
    }
    // Packet magnitudes for K: sup|Psi| = pi^-1/4, sup|Psi'| and the
    // envelope constant M = sup |x Psi(x)| computed from the closed form.
    let psi_sup = std::f64::consts::PI.powf(-0.25);
    let psi_deriv_sup = (0..4000)
        .map(|i| {
            let x = -10.0 + 20.0 * i as f64 / 4000.0;
            let h = 1e-5;
            ((exact_free_packet(&packet, &[x + h], 0.0).unwrap()
                - exact_free_packet(&packet, &[x - h], 0.0).unwrap())
                / (2.0 * h))
                .norm()
        })
        .fold(0.0, f64::max);
    let envelope_m = (0..4000)
        .map(|i| {
            let x = -10.0 + 20.0 * i as f64 / 4000.0;
            x.abs() * exact_free_packet(&packet, &[x], 0.0).unwrap().norm()
        })
        .fold(0.0, f64::max);
    let bound = butzer_bound(&ButzerParams {
        gamma: 1.0,
        psi_sup,
        psi_deriv_sup,
        envelope_m,
        eps_over_lp: 0.0,
        delta_over_lp: 0.0,
        l_p,
        band_w: None,
        truncation_r: None,
    })
    .unwrap();
    let within = measured <= bound;
    let pass = envelope_ok && yao_ok && within;
    assert!(
        verdict(
            6,
            "published bound formulas",
            pass,
            &format!(
                "envelope(planck) {envelope:.3e} (anchor 1.3e-33), yao-thomas {yao:.3e} \
                 (anchor 1.2e-27), measured {measured:.3e} <= bound {bound:.3e}: {within}"
            )
        ),
        "criterion 6 failed"
    );
}

#[test]
fn acceptance_7_entanglement_cross_pairs() {
    let params = {
        let mut p = StrategyParams::new(1, vec![4], 0.1, 0.1);
        // Zero hops only so each state reproduces its own site.
        p.delta = 0.12;
        p
    };
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&params, &rules);
    let mut initial = CausalTapestry::new(0);
    for (coord, tag) in [(-2i64, "A0"), (-1, "A1"), (0, "B0"), (1, "B1")] {
        initial
            .insert_informon(Informon::new(
                LatticeSite::new(0, vec![coord]),
                tag,
                Complex64::new(1.0, 0.0),
                Properties::default(),
            ))
            .unwrap();
    }
    initial.seal();
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
    let site = |c: i64| LatticeSite::new(1, vec![c]).embed(0.1, 0.1);
    let set = config_pcm(
        &expr,
        &initial,
        1,
        &[vec![site(-2), site(-1)], vec![site(0), site(1)]],
        &ctx,
    )
    .unwrap();
    let mut cross_max: f64 = 0.0;
    let mut paired_min = f64::MAX;
    for field in &set.fields {
        cross_max = cross_max.max(field.value_at(&[0, 1]).norm());
        cross_max = cross_max.max(field.value_at(&[1, 0]).norm());
        paired_min = paired_min.min(field.value_at(&[0, 0]).norm());
        paired_min = paired_min.min(field.value_at(&[1, 1]).norm());
    }
    let pass = cross_max <= 1e-14 && paired_min > 0.0 && !set.fields.is_empty();
    assert!(
        verdict(
            7,
            "entanglement pairing",
            pass,
            &format!(
                "max cross-pair amplitude {cross_max:.3e}, min paired amplitude {paired_min:.3e}, {} field(s)",
                set.len()
            )
        ),
        "criterion 7 failed"
    );
}

#[test]
fn acceptance_8_cat_monotonicity() {
    let mut params = StrategyParams::new(1, vec![8], 0.1, 0.1);
    params.delta = 0.25; // two-hop reach
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&params, &rules);
    let mut initial = CausalTapestry::new(0);
    for (coord, tag) in [(-2i64, "Dn"), (-1, "Dr"), (0, "Ca"), (1, "Cd")] {
        initial
            .insert_informon(Informon::new(
                LatticeSite::new(0, vec![coord]),
                tag,
                Complex64::new(1.0, 0.0),
                Properties::default(),
            ))
            .unwrap();
    }
    initial.seal();
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
    );
    let mut dead_to_alive = 0usize;
    let mut visited_dead = 0usize;
    for seed in 0..1000u64 {
        let mut rng = seeded_rng(seed);
        let outcome = sample_path(&expr, &initial, 3, &ctx, &mut rng).unwrap();
        let mut dead = false;
        for &b in &outcome.branch_log {
            if dead && b == 0 {
                dead_to_alive += 1;
            }
            dead |= b == 1;
        }
        if dead {
            visited_dead += 1;
        }
    }
    let pass = dead_to_alive == 0 && visited_dead > 0;
    assert!(
        verdict(
            8,
            "cat one-way transitions",
            pass,
            &format!(
                "1000 seeded runs, dead->alive transitions {dead_to_alive}, runs visiting dead {visited_dead}"
            )
        ),
        "criterion 8 failed"
    );
}

#[test]
fn acceptance_9_strength_norm_identity() {
    let packet = ground_packet();
    let l_p = 0.1;
    let params = StrategyParams::new(1, vec![161], 0.2, l_p);
    let sites = make_lattice(1, &params.extent, 0).unwrap();
    let t0 = init_from_samples(
        |z| exact_free_packet(&packet, &z.x, z.t).unwrap(),
        &sites,
        "p",
        &params,
    )
    .unwrap();
    let strength = process_strength(&t0, &params);

    // Quadrature of |Phi|^2 over a wide box, Phi evaluated off-lattice.
    let (a, b, n) = (-12.0, 12.0, 1921usize);
    let h = (b - a) / (n - 1) as f64;
    let grid: Vec<SpacetimePoint> = (0..n)
        .map(|i| SpacetimePoint::new(0.0, vec![a + i as f64 * h]))
        .collect();
    let field = global_field(&t0, &grid, &params).unwrap();
    let mut quad = 0.0;
    for (i, v) in field.values.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        quad += w * v.norm_sqr();
    }
    quad *= h;
    let diff = (strength - quad).abs();
    let pass = diff <= 1e-4 && (strength - 1.0).abs() < 1e-6;
    assert!(
        verdict(
            9,
            "strength/norm identity",
            pass,
            &format!("process strength {strength:.10}, quadrature {quad:.10}, |diff| {diff:.3e}")
        ),
        "criterion 9 failed"
    );
}

#[test]
fn acceptance_10_null_subalgebra() {
    let rules = RuleTable::builtin();
    let compat = CompatTable::default();
    // Character-mismatched sum.
    let mixed = ProcessExpr::SumExcl(vec![
        ProcessExpr::Primitive(PrimitiveSpec::new("S").with_character("scalar")),
        ProcessExpr::Primitive(PrimitiveSpec::new("Q").with_character("spinor")),
    ]);
    let mixed_zero = simplify(&mixed, &compat, &rules).unwrap() == ProcessExpr::Zero;
    // Declared-incompatible product.
    let cat_prod = ProcessExpr::ProdExcl(vec![
        ProcessExpr::primitive("Dr"),
        ProcessExpr::primitive("Ca"),
    ]);
    let cat_zero = simplify(&cat_prod, &CompatTable::cat(), &rules).unwrap() == ProcessExpr::Zero;
    // Fermionic identical-state self-product.
    let fermi = ProcessExpr::ProdFree(vec![
        ProcessExpr::Primitive(PrimitiveSpec::new("F").with_state("s").fermionic()),
        ProcessExpr::Primitive(PrimitiveSpec::new("F").with_state("s").fermionic()),
    ]);
    let fermi_zero = simplify(&fermi, &compat, &rules).unwrap() == ProcessExpr::Zero;

    // Randomised zero-absorption and identity laws over seeded trees.
    use rand::Rng;
    let mut rng = seeded_rng(2024);
    let mut law_failures = 0usize;
    for case in 0..200 {
        let expr = random_expr(&mut rng, 0, &mut 0);
        let absorbed = simplify(
            &ProcessExpr::ProdExcl(vec![expr.clone(), ProcessExpr::Zero]),
            &compat,
            &rules,
        )
        .unwrap();
        if absorbed != ProcessExpr::Zero {
            law_failures += 1;
            eprintln!("absorption failed for case {case}");
        }
        let with_zero = simplify(
            &ProcessExpr::SumFree(vec![expr.clone(), ProcessExpr::Zero]),
            &compat,
            &rules,
        )
        .unwrap();
        let wrapped = simplify(&ProcessExpr::SumFree(vec![expr]), &compat, &rules).unwrap();
        if with_zero != wrapped {
            law_failures += 1;
            eprintln!("identity failed for case {case}");
        }
        let _ = rng.gen_range(0..2);
    }
    let pass = mixed_zero && cat_zero && fermi_zero && law_failures == 0;
    assert!(
        verdict(
            10,
            "null subalgebra",
            pass,
            &format!(
                "mismatched sum -> O: {mixed_zero}, declared product -> O: {cat_zero}, \
                 fermionic self-product -> O: {fermi_zero}, randomized law failures: {law_failures}/400"
            )
        ),
        "criterion 10 failed"
    );
}

fn random_expr(rng: &mut tapestry::SimRng, depth: usize, counter: &mut usize) -> ProcessExpr {
    use rand::Rng;
    let choice = if depth >= 3 {
        rng.gen_range(0..2)
    } else {
        rng.gen_range(0..7)
    };
    match choice {
        0 => {
            *counter += 1;
            ProcessExpr::primitive(&format!("P{counter}"))
        }
        1 => ProcessExpr::Zero,
        2 => ProcessExpr::Scalar(
            Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)),
            Box::new(random_expr(rng, depth + 1, counter)),
        ),
        n => {
            let len = rng.gen_range(1..3);
            let children: Vec<ProcessExpr> = (0..len)
                .map(|_| random_expr(rng, depth + 1, counter))
                .collect();
            match n {
                3 => ProcessExpr::SumExcl(children),
                4 => ProcessExpr::SumFree(children),
                5 => ProcessExpr::ProdExcl(children),
                _ => ProcessExpr::ProdFree(children),
            }
        }
    }
}

// Shared-surface smoke checks the acceptance criteria rely on indirectly.

#[test]
fn sequence_tree_examples_hold() {
    let params = StrategyParams::new(1, vec![3], 0.1, 0.1);
    let rules = RuleTable::builtin();
    let ctx = EnumContext::new(&params, &rules);
    let initial = init_from_samples(
        |_| Complex64::new(1.0, 0.0),
        &[LatticeSite::new(0, vec![0])],
        "seed",
        &params,
    )
    .unwrap();
    let one = build_sequence_tree(&ProcessExpr::primitive("P"), &initial, 1, &ctx).unwrap();
    assert_eq!(one.outcomes.len(), 3);
    let two = build_sequence_tree(&ProcessExpr::primitive("P"), &initial, 2, &ctx).unwrap();
    assert_eq!(two.outcomes.len(), 6);
}

#[test]
fn field_export_columns_are_stable() {
    let params = StrategyParams::new(1, vec![3], 0.1, 0.1);
    let field = WaveField::zero(
        vec![SpacetimePoint::new(0.1, vec![-0.1])],
        &params,
    );
    let mut buf = Vec::new();
    field.write_csv(&mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("t,x,re,im,abs2\n"));
}

#[test]
fn acceptance_uses_distinct_tags() {
    // Guard: the fixed instances above rely on unique primitive ids.
    let ids: BTreeSet<&str> = ["A0", "A1", "B0", "B1", "Dn", "Dr", "Ca", "Cd"]
        .into_iter()
        .collect();
    assert_eq!(ids.len(), 8);
}
