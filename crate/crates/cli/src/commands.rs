use qzeno::config::{inverse_temperature, RunConfig, FIG1, FIG2C, FIG_PURITY};
use qzeno::equilibrium;
use qzeno::exact::{ExactOptions, ExactSolver, ExactTrace};
use qzeno::export::{line_chart_svg, CsvTable, Series};
use qzeno::master_equation::{evolve_with, initial_from_temperature, Regime, SimulationTrace};
use qzeno::rates::RateTable;
use qzeno::scheduler::{greedy_schedule, temperature_sweep, SweepTable};
use qzeno::spectrum::discretize;
use qzeno::thermo::{cooling_scan, high_t_bound, sigma};
use qzeno::{Error, Result};

const TIME: &str = "1/omega_a";
const ENERGY: &str = "omega_a";
const RATE: &str = "omega_a";
const NONE: &str = "";

pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn csv(name: &str, table: &CsvTable) -> Result<Artifact> {
    Ok(Artifact { name: name.to_string(), contents: table.to_csv_string()? })
}

fn svg(name: &str, contents: String) -> Artifact {
    Artifact { name: name.to_string(), contents }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Equilibrium,
    Rates,
    Evolve,
    Exact,
    Entropy,
    CoolingCheck,
    Schedule,
    Sweep,
}

/// Command-specific requirements that only depend on the configuration.
pub fn preflight(cmd: Command, cfg: &RunConfig) -> Result<()> {
    match cmd {
        Command::Exact if !cfg.temperature.bath()?.is_zero_temperature() => {
            Err(Error::Config("exact engine needs alpha_bath_dimensionless = inf (bath in vacuum)".into()))
        }
        Command::Entropy if cfg.temperature.bath()?.is_zero_temperature() => {
            Err(Error::Config("entropy needs a finite bath temperature (Gibbs reference off the boundary)".into()))
        }
        Command::Schedule | Command::Sweep if cfg.objective.is_none() => {
            Err(Error::Config("this command needs an [objective] section".into()))
        }
        Command::CoolingCheck if cfg.temperature.bath()?.alpha() == 0.0 => {
            Err(Error::Config("cooling check needs alpha_bath_dimensionless > 0".into()))
        }
        _ => Ok(()),
    }
}

fn base(cfg: &RunConfig, what: &str) -> CsvTable {
    CsvTable::default()
        .meta("quantity", what)
        .meta("config_sha256", cfg.hash_hex())
        .meta("units", "hbar = 1, omega_a = 1, alpha = beta hbar omega_a")
}

fn with_columns(mut t: CsvTable, cols: &[(&str, &str)]) -> CsvTable {
    t.columns = CsvTable::new(cols).columns;
    t
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Vec<Artifact>> {
    match cmd {
        Command::Equilibrium => equilibrium_table(cfg).and_then(|t| Ok(vec![csv("equilibrium.csv", &t)?])),
        Command::Rates => rates_table(cfg, None).and_then(|t| Ok(vec![csv("rates.csv", &t)?])),
        Command::Evolve => {
            let tr = evolve(cfg)?;
            let t = trace_table(cfg, &tr, "rate-equation populations")?;
            let svg_doc = line_chart_svg(
                "excited population",
                "t [1/omega_a]",
                "rho_ee",
                &[Series { label: "rate equation", x: &tr.times, y: &tr.rho_ee }],
            );
            Ok(vec![csv("trace.csv", &t)?, csv("events.csv", &events_table(cfg, &tr)?)?, svg("trace.svg", svg_doc)])
        }
        Command::Exact => {
            let (tr, freqs) = exact(cfg)?;
            Ok(vec![
                csv("exact_trace.csv", &exact_table(cfg, &tr)?)?,
                csv("exact_modes.csv", &modes_table(cfg, &tr, &freqs)?)?,
            ])
        }
        Command::Entropy => {
            let tr = evolve(cfg)?;
            Ok(vec![csv("entropy.csv", &entropy_table(cfg, &tr)?)?])
        }
        Command::CoolingCheck => Ok(vec![csv("cooling.csv", &cooling_table(cfg)?)?]),
        Command::Schedule => {
            let spec = cfg.spec()?;
            let obj = cfg.objective(&spec).expect("checked in preflight");
            let initial = initial_from_temperature(cfg.temperature.system()?);
            let r = greedy_schedule(&obj, initial, &spec, cfg.temperature.bath()?)?;
            let t = trace_table(cfg, &r.trace, "greedy-schedule populations")?
                .meta("direction", format!("{:?}", r.direction).to_lowercase())
                .meta("engine", format!("{:?}", obj.engine))
                .meta("final_rho_ee", r.final_rho_ee)
                .meta("extremal_rho_ee", r.extremal_rho_ee)
                .meta("equilibrium_rho_ee", r.equilibrium_rho_ee);
            Ok(vec![
                Artifact { name: "schedule.json".into(), contents: r.schedule.to_json_string() + "\n" },
                csv("schedule_trace.csv", &t)?,
            ])
        }
        Command::Sweep => {
            let (t, tab) = sweep_table(cfg)?;
            Ok(vec![csv("sweep.csv", &t)?, svg("sweep.svg", sweep_svg(&tab))])
        }
    }
}

fn equilibrium_table(cfg: &RunConfig) -> Result<CsvTable> {
    let spec = cfg.spec()?;
    let mut t = with_columns(
        base(cfg, "coupled equilibrium purity <sigma_z> and interaction energy")
            .meta("relative_change", "(p_corrected - p_bare)/|p_bare|"),
        &[
            ("alpha", NONE),
            ("p_bare", NONE),
            ("p_corrected", NONE),
            ("relative_change", NONE),
            ("rho_ee_corrected", NONE),
            ("mean_hsb", ENERGY),
        ],
    );
    for &a in &cfg.grid.alphas_dimensionless {
        let r = equilibrium::report(&spec, inverse_temperature(a)?)?;
        let rel = if r.p_eq_bare == 0.0 { f64::NAN } else { (r.p_eq_corrected - r.p_eq_bare) / r.p_eq_bare.abs() };
        t.push(vec![a, r.p_eq_bare, r.p_eq_corrected, rel, r.rho_ee_corrected, r.mean_hsb])?;
    }
    Ok(t)
}

fn rates_table(cfg: &RunConfig, t_max: Option<f64>) -> Result<CsvTable> {
    let spec = cfg.spec()?;
    let beta = cfg.temperature.bath()?;
    let table = RateTable::build(&spec, beta, t_max.unwrap_or(cfg.rates_t_max(&spec)), cfg.solver.table_step_over_inv_omega_a)?;
    let mut t = with_columns(
        base(cfg, "time-dependent relaxation rates and their integrals")
            .meta("alpha_bath", beta.alpha())
            .meta("markov_r_e", table.markov_e)
            .meta("markov_r_g", table.markov_g)
            .meta("zeno_slope_rdot0", table.rdot0),
        &[("t", TIME), ("r_e", RATE), ("r_g", RATE), ("j_e", NONE), ("j_g", NONE)],
    );
    for k in 0..table.times.len() {
        t.push(vec![table.times[k], table.r_e[k], table.r_g[k], table.j_e[k], table.j_g[k]])?;
    }
    Ok(t)
}

fn evolve(cfg: &RunConfig) -> Result<SimulationTrace> {
    let spec = cfg.spec()?;
    let initial = initial_from_temperature(cfg.temperature.system()?);
    evolve_with(initial, &cfg.schedule()?, cfg.horizon(&spec), &spec, cfg.temperature.bath()?, &cfg.evolve_options())
}

fn regime_code(r: Regime) -> f64 {
    match r {
        Regime::Zeno => 0.0,
        Regime::Transient => 1.0,
        Regime::Markov => 2.0,
    }
}

fn trace_table(cfg: &RunConfig, tr: &SimulationTrace, what: &str) -> Result<CsvTable> {
    let mut t = with_columns(
        base(cfg, what)
            .meta("regime_code", "0 = zeno, 1 = transient, 2 = markov")
            .meta("positivity_defect", tr.positivity_defect),
        &[
            ("t", TIME),
            ("rho_ee", NONE),
            ("rho_gg", NONE),
            ("rho_ee_dot", RATE),
            ("since_reset", TIME),
            ("regime", NONE),
        ],
    );
    for k in 0..tr.len() {
        t.push(vec![
            tr.times[k],
            tr.rho_ee[k],
            1.0 - tr.rho_ee[k],
            tr.rho_ee_dot[k],
            tr.since_reset[k],
            regime_code(tr.regime[k]),
        ])?;
    }
    Ok(t)
}

fn events_table(cfg: &RunConfig, tr: &SimulationTrace) -> Result<CsvTable> {
    let mut t = with_columns(base(cfg, "measurement events"), &[("index", NONE), ("t", TIME), ("rho_ee", NONE)]);
    for e in &tr.events {
        t.push(vec![e.index as f64, e.time, e.rho_ee])?;
    }
    Ok(t)
}

fn entropy_table(cfg: &RunConfig, tr: &SimulationTrace) -> Result<CsvTable> {
    let p0 = initial_from_temperature(cfg.temperature.bath()?);
    let e = sigma(tr, &p0)?;
    let mut t = with_columns(
        base(cfg, "relative entropy to the bath Gibbs state; sigma = -dS/dt").meta("reference_rho_ee", p0.rho_ee),
        &[("t", TIME), ("rho_ee", NONE), ("relative_entropy", NONE), ("sigma", RATE)],
    );
    for k in 0..e.times.len() {
        t.push(vec![e.times[k], tr.rho_ee[k], e.entropy[k], e.sigma[k]])?;
    }
    Ok(t)
}

fn cooling_table(cfg: &RunConfig) -> Result<CsvTable> {
    let spec = cfg.spec()?;
    let beta = cfg.temperature.bath()?;
    let scan = cooling_scan(&spec, beta, &cfg.cooling_options(&spec))?;
    let crossings: Vec<String> = scan.crossings.iter().map(|c| format!("{c:e}")).collect();
    let mut t = with_columns(
        base(cfg, "cooling-condition margin (positive = cooling possible)")
            .meta("alpha_bath", beta.alpha())
            .meta("high_t_bound_omega", high_t_bound(beta, 1.0))
            .meta("crossings", crossings.join(" ")),
        &[("t", TIME), ("margin", NONE), ("cools", NONE)],
    );
    for m in &scan.margins {
        t.push(vec![m.t, m.margin, if m.cools { 1.0 } else { 0.0 }])?;
    }
    Ok(t)
}

fn exact(cfg: &RunConfig) -> Result<(ExactTrace, Vec<f64>)> {
    let spec = cfg.spec()?;
    let model = discretize(&spec, cfg.exact.n_modes, cfg.exact.band_half_widths)?;
    let solver = ExactSolver::new(&model, cfg.exact.max_quanta)?;
    let opts = ExactOptions { sample_step: cfg.exact.sample_step_over_inv_omega_a, mode_every: cfg.exact.mode_every };
    let tr = solver.run(solver.product_state(cfg.exact.level()), &cfg.schedule()?, cfg.horizon(&spec), &opts)?;
    Ok((tr, model.modes.iter().map(|m| m.0).collect()))
}

fn exact_table(cfg: &RunConfig, tr: &ExactTrace) -> Result<CsvTable> {
    let mut t = with_columns(
        base(cfg, "exact truncated-bath observables").meta("n_modes", cfg.exact.n_modes).meta("max_quanta", cfg.exact.max_quanta),
        &[
            ("t", TIME),
            ("rho_ee", NONE),
            ("system_energy", ENERGY),
            ("bath_energy", ENERGY),
            ("interaction_energy", ENERGY),
            ("total_energy", ENERGY),
            ("trace", NONE),
        ],
    );
    for s in &tr.samples {
        t.push(vec![s.time, s.rho_ee, s.system_energy, s.bath_energy, s.interaction_energy, s.total_energy, s.trace])?;
    }
    Ok(t)
}

fn modes_table(cfg: &RunConfig, tr: &ExactTrace, freqs: &[f64]) -> Result<CsvTable> {
    let mut t = with_columns(
        base(cfg, "bath mode occupations <a^dag a>"),
        &[("t", TIME), ("mode", NONE), ("omega", RATE), ("occupation", NONE)],
    );
    for s in &tr.samples {
        if let Some(occ) = &s.mode_occupations {
            for (k, (&w, &n)) in freqs.iter().zip(occ).enumerate() {
                t.push(vec![s.time, k as f64, w, n])?;
            }
        }
    }
    Ok(t)
}

fn sweep_table(cfg: &RunConfig) -> Result<(CsvTable, SweepTable)> {
    let spec = cfg.spec()?;
    let obj = cfg.objective(&spec).expect("checked in preflight");
    let tab = temperature_sweep(&obj, &cfg.grid.alphas_dimensionless, &spec)?;
    let crit: Vec<String> = tab.critical_alphas.iter().map(|c| format!("{c:e}")).collect();
    let mut t = with_columns(
        base(cfg, "greedy heating and cooling versus common temperature")
            .meta(
                "definition",
                "max_heat = max_k rho_ee(t_k) - rho_eq (heat-greedy); max_cool = rho_eq - min_k rho_ee(t_k) (cool-greedy); t_k = measurement instants",
            )
            .meta("measurements", obj.measurements)
            .meta("window", format!("[{}, {}]", obj.min_interval, obj.max_interval))
            .meta("horizon", obj.horizon)
            .meta("engine", format!("{:?}", obj.engine))
            .meta("critical_alphas", crit.join(" ")),
        &[("alpha", NONE), ("max_heat", NONE), ("max_cool", NONE)],
    );
    for r in &tab.rows {
        t.push(vec![r.alpha, r.max_heat, r.max_cool])?;
    }
    Ok((t, tab))
}

fn sweep_svg(tab: &SweepTable) -> String {
    let a: Vec<f64> = tab.rows.iter().map(|r| r.alpha).collect();
    let h: Vec<f64> = tab.rows.iter().map(|r| r.max_heat).collect();
    let c: Vec<f64> = tab.rows.iter().map(|r| r.max_cool).collect();
    line_chart_svg(
        "maximal heating and cooling",
        "alpha",
        "rho_ee deviation",
        &[Series { label: "max heating", x: &a, y: &h }, Series { label: "max cooling", x: &a, y: &c }],
    )
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return ys[0];
    }
    if k >= xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1) = (xs[k - 1], xs[k]);
    ys[k - 1] + (ys[k] - ys[k - 1]) * (x - x0) / (x1 - x0)
}

/// All figure data from the bundled configurations.
pub fn figures() -> Result<Vec<Artifact>> {
    let fig1 = RunConfig::from_toml_str(FIG1)?;
    let purity = RunConfig::from_toml_str(FIG_PURITY)?;
    let fig2c = RunConfig::from_toml_str(FIG2C)?;
    let mut out = Vec::new();

    let rates = rates_table(&fig1, Some(30.0))?;
    let (t, re, rg) = (rates.column("t").unwrap(), rates.column("r_e").unwrap(), rates.column("r_g").unwrap());
    out.push(csv("fig1a_rates.csv", &rates)?);
    out.push(svg(
        "fig1a_rates.svg",
        line_chart_svg("relaxation rates", "t [1/omega_a]", "rate [omega_a]", &[
            Series { label: "R_e", x: &t, y: &re },
            Series { label: "R_g", x: &t, y: &rg },
        ]),
    ));

    let me = evolve(&fig1)?;
    let (ex, freqs) = exact(&fig1)?;
    let mut trace = with_columns(
        base(&fig1, "rate equation versus exact 40-mode bath")
            .meta("schedule", fig1.schedule()?.to_json_string().replace(['\n', ' '], "")),
        &[
            ("t", TIME),
            ("rho_ee_me", NONE),
            ("rho_ee_exact", NONE),
            ("system_energy", ENERGY),
            ("bath_energy", ENERGY),
            ("interaction_energy", ENERGY),
        ],
    );
    for s in &ex.samples {
        trace.push(vec![
            s.time,
            interpolate(&me.times, &me.rho_ee, s.time),
            s.rho_ee,
            s.system_energy,
            s.bath_energy,
            s.interaction_energy,
        ])?;
    }
    let (tt, pm, pe) = (trace.column("t").unwrap(), trace.column("rho_ee_me").unwrap(), trace.column("rho_ee_exact").unwrap());
    out.push(csv("fig1_trace.csv", &trace)?);
    out.push(svg(
        "fig1_trace.svg",
        line_chart_svg("excited population", "t [1/omega_a]", "rho_ee", &[
            Series { label: "rate equation", x: &tt, y: &pm },
            Series { label: "exact", x: &tt, y: &pe },
        ]),
    ));

    let modes = modes_table(&fig1, &ex, &freqs)?;
    out.push(csv("fig1c_modes.csv", &modes)?);
    let last = ex.samples.iter().rev().find_map(|s| s.mode_occupations.clone()).unwrap_or_default();
    out.push(svg(
        "fig1c_modes.svg",
        line_chart_svg("final bath mode occupations", "omega [omega_a]", "<n>", &[Series {
            label: "exact",
            x: &freqs,
            y: &last,
        }]),
    ));

    // entropy panel: same bath at alpha = 1, system starting at infinite temperature
    let mut warm = fig1.clone();
    warm.temperature.alpha_bath_dimensionless = 1.0;
    warm.temperature.alpha_system_dimensionless = 0.0;
    let warm_trace = evolve(&warm)?;
    let ent = entropy_table(&warm, &warm_trace)?;
    let (et, es) = (ent.column("t").unwrap(), ent.column("sigma").unwrap());
    out.push(csv("fig1b_entropy.csv", &ent)?);
    out.push(svg("fig1b_entropy.svg", line_chart_svg("entropy production", "t [1/omega_a]", "sigma", &[Series {
        label: "sigma",
        x: &et,
        y: &es,
    }])));

    let eq = equilibrium_table(&purity)?;
    let (a, rel) = (eq.column("alpha").unwrap(), eq.column("relative_change").unwrap());
    out.push(csv("fig_purity.csv", &eq)?);
    out.push(svg("fig_purity.svg", line_chart_svg("relative purity change", "alpha", "relative change", &[Series {
        label: "corrected vs bare",
        x: &a,
        y: &rel,
    }])));

    let (sw, tab) = sweep_table(&fig2c)?;
    out.push(csv("fig2c_sweep.csv", &sw)?);
    out.push(svg("fig2c_sweep.svg", sweep_svg(&tab)));
    Ok(out)
}
