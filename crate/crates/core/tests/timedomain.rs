use ringmem_core::presets;
use ringmem_core::spin::discretize;
use ringmem_core::timedomain::*;
use ringmem_core::{Complex64, Error, ResonatorSpec, SystemConfig};

fn etd(dt: f64, t_end: Option<f64>) -> IntegrationSettings {
    IntegrationSettings {
        dt,
        t_end,
        scheme: Scheme::ExponentialRk4,
    }
}

fn run(cfg: &SystemConfig, pulse: &PulseSpec, spins: usize, trunc: f64, integration: IntegrationSettings) -> SimulationResult {
    simulate(
        cfg,
        pulse,
        &SimulationSettings {
            spins_per_ensemble: spins,
            truncation: trunc,
            integration,
        },
    )
    .unwrap()
}

#[test]
fn zero_input_gives_identically_zero_output() {
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(2.0, 0.0).with_amplitude(0.0);
    for scheme in [Scheme::Rk4, Scheme::ExponentialRk4] {
        let r = run(
            &cfg,
            &pulse,
            11,
            10.0,
            IntegrationSettings {
                dt: 0.005,
                t_end: Some(20.0),
                scheme,
            },
        );
        assert!(r.output_series.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(r.final_spins.iter().flatten().all(|z| z.norm() == 0.0));
        let l = r.energy_ledger;
        assert_eq!([l.input, l.output, l.residual_cavity, l.stored_spin, l.intrinsic_loss], [0.0; 5]);
    }
}

#[test]
fn bare_cavity_passes_all_energy() {
    let r = ResonatorSpec::new(1, 1.0, 0.7, 0.0, 1.0, 1.0);
    let cfg = SystemConfig::new(vec![r], 1.0, 0.0).unwrap();
    let pulse = PulseSpec::gaussian(20.0, 0.7);
    let res = run(&cfg, &pulse, 1, 10.0, etd(0.05, None));
    let l = res.energy_ledger;
    assert!((l.output / l.input - 1.0).abs() < 1e-4, "{l:?}");
    assert_eq!(l.stored_spin, 0.0);
}

#[test]
fn output_scales_linearly_with_input() {
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(2.0, 0.2);
    let base = run(&cfg, &pulse, 41, 20.0, etd(0.02, Some(40.0)));
    // Powers of two scale exactly in binary floating point.
    let twice = run(&cfg, &pulse.with_amplitude(2.0), 41, 20.0, etd(0.02, Some(40.0)));
    for (a, b) in base.output_series.iter().zip(&twice.output_series) {
        assert_eq!(2.0 * a, *b);
    }
    let c = 0.37;
    let scaled = run(&cfg, &pulse.with_amplitude(c), 41, 20.0, etd(0.02, Some(40.0)));
    for (a, b) in base.output_series.iter().zip(&scaled.output_series) {
        assert!((c * a - b).norm() <= 1e-14 * (1.0 + a.norm()));
    }
}

#[test]
fn lossless_ledger_balances() {
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(3.0, 0.4);
    let r = run(&cfg, &pulse, 401, 1e3, etd(0.02, None));
    assert!(r.energy_ledger.relative_imbalance() <= 1e-6, "{:?}", r.energy_ledger);
    assert_eq!(r.energy_ledger, energy_ledger(&r));
}

#[test]
fn lossy_ledger_balances_with_loss_integral() {
    let cfg = presets::reference_config().with_uniform_gamma(0.05).unwrap();
    let pulse = PulseSpec::gaussian(3.0, -0.3);
    let r = run(&cfg, &pulse, 401, 1e3, etd(0.02, None));
    let l = r.energy_ledger;
    assert!(l.intrinsic_loss > 1e-3 * l.input);
    assert!(l.relative_imbalance() <= 1e-6, "{l:?}");
}

#[test]
fn halving_dt_shrinks_imbalance_at_fourth_order() {
    let cfg = presets::reference_config().with_uniform_gamma(0.02).unwrap();
    let pulse = PulseSpec::gaussian(1.5, 0.5);
    let imb = |dt| run(&cfg, &pulse, 201, 1e3, etd(dt, Some(40.0))).energy_ledger.imbalance().abs();
    let (coarse, fine) = (imb(0.03), imb(0.015));
    assert!(coarse > 1e-12, "imbalance {coarse} too close to rounding");
    assert!(coarse / fine >= 8.0, "{coarse} -> {fine}");
}

#[test]
fn classic_and_exponential_schemes_agree() {
    let cfg = presets::reference_config().with_uniform_gamma(0.01).unwrap();
    let pulse = PulseSpec::gaussian(2.0, 0.3);
    let rk = run(
        &cfg,
        &pulse,
        21,
        10.0,
        IntegrationSettings {
            dt: 0.002,
            t_end: Some(40.0),
            scheme: Scheme::Rk4,
        },
    );
    let ex = run(&cfg, &pulse, 21, 10.0, etd(0.002, Some(40.0)));
    let err = relative_l2_error(&rk.output_series, &ex.output_series, &rk.input_series).unwrap();
    assert!(err < 1e-9, "{err}");
    assert!(rk.energy_ledger.relative_imbalance() < 1e-9);
}

#[test]
fn classic_scheme_rejects_unresolved_steps() {
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(2.0, 0.0);
    let ensembles: Vec<_> = cfg
        .resonators()
        .iter()
        .map(|r| discretize(&r.spin_ensemble(), 101, 1e3).unwrap())
        .collect();
    let rk = IntegrationSettings {
        dt: 0.01,
        t_end: Some(1.0),
        scheme: Scheme::Rk4,
    };
    // Spin tails reach ~1e3 linewidths, so the classic scheme needs a tiny step.
    assert!(matches!(integrate(&cfg, &ensembles, &pulse, &rk), Err(Error::StepTooLarge { .. })));
    // The exponential scheme integrates the rotations exactly.
    assert!(integrate(&cfg, &ensembles, &pulse, &etd(0.01, Some(1.0))).is_ok());
    assert!(matches!(
        integrate(&cfg, &ensembles, &pulse, &etd(0.05, Some(1.0))),
        Err(Error::StepTooLarge { .. })
    ));
    assert!(integrate(&cfg, &ensembles[..2], &pulse, &etd(0.01, Some(1.0))).is_err());
}

#[test]
fn oracle_tracks_linear_response() {
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(8.0, 0.0);
    let r = run(&cfg, &pulse, 1601, 1e3, etd(0.025, None));
    let reference = frequency_propagate(&cfg, &r.input_series, &r.time_grid).unwrap();
    let err = relative_l2_error(&r.output_series, &reference, &r.input_series).unwrap();
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn stored_fraction_matches_plateau_efficiency() {
    // A narrowband pulse inside the plateau: storage ≈ η⁰ at the carrier.
    let cfg = presets::reference_config();
    let pulse = PulseSpec::gaussian(8.0, 0.6);
    let r = run(&cfg, &pulse, 4001, 1e3, etd(0.025, None));
    let eta0 = ringmem_core::storage_efficiency_lossless(&cfg, 0.6).unwrap();
    let stored = r.energy_ledger.storage_fraction();
    assert!((stored - eta0).abs() <= 1e-3, "{stored} vs {eta0}");
}

#[test]
fn matched_cavity_absorbs_in_time_domain() {
    let cfg = presets::matched_single_cavity();
    let pulse = PulseSpec::gaussian(30.0, 0.0);
    let r = run(&cfg, &pulse, 4001, 1e3, etd(0.05, None));
    assert!(r.energy_ledger.output_fraction() <= 1e-4, "{:?}", r.energy_ledger);
}
