use proptest::prelude::*;
use qbcharge::models::ModelKind;
use qbcharge::scenarios::{GridSpec, Solver, SweepVar};
use qbcharge::stochastic::Scheme;
use qbcharge_cli::config::{canonical_config, parse_config, parse_grid, ConfigError, SweepTarget};

fn parse_error(text: &str) -> (usize, usize, String) {
    match parse_config(text) {
        Err(ConfigError::Parse { line, col, msg }) => (line, col, msg),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn full_file_parses() {
    let text = "\
# charging under dephasing
[model]
model = star_tls
n_batteries = 3
F = 0.94   # drive
g = 1
gamma_C = 1.0

[solver]
solver = stochastic
t_max = 5
n_t = 11
dt = 1e-3
n_traj = 200
seed = 42
scheme = noise

[output]
path = out/run.csv
observables = energy

[sweep]
F = logspace(0.1, 10, 5)
";
    let c = parse_config(text).unwrap();
    let s = &c.scenario;
    assert_eq!(s.kind, ModelKind::StarTls(3));
    assert_eq!(s.params.f, 0.94);
    assert_eq!(s.solver, Solver::Stochastic);
    assert_eq!(s.stochastic.scheme, Scheme::ClassicalNoiseLinear);
    assert_eq!(s.stochastic.seed, 42);
    assert_eq!(s.stochastic.dt, Some(1e-3));
    assert_eq!(s.observables, vec!["energy".to_string()]);
    assert_eq!(s.output.as_deref(), Some(std::path::Path::new("out/run.csv")));
    let sw = s.sweep.as_ref().unwrap();
    assert_eq!(sw.var, SweepVar::F);
    assert_eq!(sw.grid, GridSpec::Logspace { a: 0.1, b: 10.0, n: 5 });
    assert_eq!(c.target, SweepTarget::Final);
}

#[test]
fn errors_point_at_line_and_column() {
    assert_eq!(parse_error("[model]\nF = abc\n"), (2, 5, "F: expected a number, found 'abc'".into()));
    let (line, col, msg) = parse_error("[model]\n  gama_C = 1\n");
    assert_eq!((line, col), (2, 3));
    assert!(msg.contains("unknown key 'gama_C'"), "{msg}");
    let (line, col, _) = parse_error("[model]\ng = 1\n[thermo]\n");
    assert_eq!((line, col), (3, 2));
    assert_eq!(parse_error("F = 1\n").0, 1);
    assert_eq!(parse_error("[model]\ng 1\n").0, 2);
    let (line, _, msg) = parse_error("[model]\ng = 1\ng = 2\n");
    assert_eq!(line, 3);
    assert!(msg.contains("duplicate"));
    let (line, col, _) = parse_error("[sweep]\nF = linspace(0, 1)\n");
    assert_eq!((line, col), (2, 5));
    let (line, _, msg) = parse_error("[output]\nobservables = energy, heat\n");
    assert_eq!(line, 2);
    assert!(msg.contains("heat"));
    assert!(parse_error("[model]\nmodel = star_tls\n").2.contains("n_batteries"));
    let (_, _, msg) = parse_error("[solver]\nsolver = euler\n");
    assert!(msg.contains("unknown solver"));
}

#[test]
fn validation_names_the_field() {
    for (text, field) in [
        ("[model]\ngamma_C = -1\n", "gamma_C"),
        ("[model]\nmodel = star_tls\nn_batteries = 9\n", "n_batteries"),
        ("[sweep]\ntarget = detuning_max\nF = list(0.1, 0.2)\n", "target"),
    ] {
        match parse_config(text) {
            Err(ConfigError::Validation { field: f, .. }) => assert_eq!(f, field, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
    // solver and model must be compatible
    assert!(parse_config("[model]\nmodel = tls_ho\n[solver]\nsolver = moments\n").is_err());
}

#[test]
fn grids() {
    assert_eq!(parse_grid("list(1, 2.5, 3)").unwrap(), GridSpec::List(vec![1.0, 2.5, 3.0]));
    assert_eq!(parse_grid(" linspace(-1,1,3) ").unwrap(), GridSpec::Linspace { a: -1.0, b: 1.0, n: 3 });
    for bad in ["range(1, 2)", "linspace(1, 2, x)", "list()", "logspace(1, 2, 3", "linspace(1, 2, 0)"] {
        assert!(parse_grid(bad).is_err(), "{bad}");
    }
}

#[test]
fn defaults_round_trip() {
    let c = parse_config("").unwrap();
    assert_eq!(parse_config(&canonical_config(&c)).unwrap(), c);
}

fn arb_grid() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (-5.0..5.0f64, 0.0..5.0f64, 1..50usize).prop_map(|(a, w, n)| GridSpec::Linspace { a, b: a + w + 1e-3, n }),
        (1e-3..1.0f64, 1.0..1e3f64, 2..50usize).prop_map(|(a, b, n)| GridSpec::Logspace { a, b, n }),
        prop::collection::vec(0.0..3.0f64, 1..6).prop_map(|mut v| {
            v.sort_by(f64::total_cmp);
            v.dedup();
            GridSpec::List(v)
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_text_round_trips(
        model in 0..4usize,
        nb in 1..=6usize,
        f in 0.0..20.0f64,
        g in 0.01..5.0f64,
        gm in 0.0..100.0f64,
        dcd in -1.0..1.0f64,
        dbd in -1.0..1.0f64,
        t_max in 0.1..500.0f64,
        n_t in 2..2000usize,
        n in 1..30u32,
        seed in any::<u64>(),
        n_traj in 1..5000usize,
        noise in any::<bool>(),
        grid in prop::option::of(arb_grid()),
    ) {
        let model_lines = match model {
            0 => "model = two_tls\n".to_string(),
            1 => "model = two_ho\ncutoff = 12\n".to_string(),
            2 => "model = tls_ho\ncutoff = 20\n".to_string(),
            _ => format!("model = star_tls\nn_batteries = {nb}\n"),
        };
        let sweep = grid.as_ref().map_or(String::new(), |g| {
            let text = match g {
                GridSpec::Linspace { a, b, n } => format!("linspace({a}, {b}, {n})"),
                GridSpec::Logspace { a, b, n } => format!("logspace({a}, {b}, {n})"),
                GridSpec::List(v) => format!("list({})", v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")),
            };
            format!("[sweep]\ngamma_C = {text}\n")
        });
        let text = format!(
            "[model]\n{model_lines}F = {f}\ng = {g}\ngamma_C = {gm}\ndelta_Cd = {dcd}\ndelta_Bd = {dbd}\n\
             [solver]\nt_max = {t_max}\nn_t = {n_t}\nn = {n}\nseed = {seed}\nn_traj = {n_traj}\nscheme = {}\n{sweep}",
            if noise { "noise" } else { "measurement" }
        );
        let c = parse_config(&text).unwrap();
        let canon = canonical_config(&c);
        let again = parse_config(&canon).unwrap();
        prop_assert_eq!(&again, &c);
        prop_assert_eq!(canonical_config(&again), canon);
    }

    #[test]
    fn garbage_never_panics(text in "[\\[\\]a-zA-Z_=#., 0-9()\n-]{0,200}") {
        let _ = parse_config(&text);
    }
}
