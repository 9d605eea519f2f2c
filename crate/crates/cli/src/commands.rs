use std::collections::BTreeSet;
use std::time::Instant;

use anyhow::Result;
use npq::validation::{nu_grid, sweep_points, DEFAULT_P_LIM, DEFAULT_P_LIM_AGGREGATION};
use npq::{
    no_wait_probability, waiting_pdf_laguerre, Engine, MarginalSource, Model, MopReport, MultiLevelParams, Pmf,
    QuadratureOptions, TwoLevelParams,
};
use serde_json::{json, Map, Value};

use crate::output::{emit, Cell, Document, Format, Table};
use crate::{
    Against, Common, JointArgs, MarginalArgs, MopFailure, TestArg, UsageError, ValidateArgs, WaitArgs, WaitMethod,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn quadrature_options(tol: f64, max_refinements: usize) -> Result<QuadratureOptions<f64>> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(usage(format!("--tol must lie in (0, 1), got {tol}")));
    }
    Ok(QuadratureOptions { max_refinements, ..QuadratureOptions::with_tol(tol) })
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Quadrature => "quad",
        Engine::Exact => "exact",
        Engine::Asymptotic => "asym",
        Engine::Auto => "auto",
    }
}

fn params_block(c: &Common) -> Map<String, Value> {
    let mut p = Map::new();
    p.insert("r".into(), json!(c.r));
    p.insert("nu".into(), json!(c.nu));
    p.insert("c".into(), json!(c.servers));
    p.insert("engine".into(), json!(engine_name(c.engine.into())));
    p.insert("tol".into(), json!(c.tol));
    p
}

/// Methods used and refinement statistics over a set of entries.
#[derive(Default)]
struct Stats {
    methods: BTreeSet<&'static str>,
    max_refinements: usize,
    worst_tol: f64,
}

impl Stats {
    fn add(&mut self, p: &Pmf) {
        self.methods.insert(p.method.name());
        self.max_refinements = self.max_refinements.max(p.refinements);
        self.worst_tol = self.worst_tol.max(p.achieved_tol);
    }

    fn write(&self, meta: &mut Map<String, Value>) {
        meta.insert("methods".into(), json!(self.methods));
        meta.insert("refinements".into(), json!({ "max": self.max_refinements, "worst_achieved_tol": self.worst_tol }));
    }
}

fn finish(doc: &mut Document, start: Instant) {
    doc.meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    doc.meta.insert("runtime_seconds".into(), json!(start.elapsed().as_secs_f64()));
}

fn pmf_columns(verbose: bool) -> Vec<&'static str> {
    let mut c = vec!["index_hi", "index_lo", "probability"];
    if verbose {
        c.extend(["pole", "cut"]);
    }
    c
}

fn pmf_row(hi: Cell, lo: Cell, p: &Pmf, verbose: bool) -> Vec<Cell> {
    let mut row = vec![hi, lo, Cell::Num(p.value)];
    if verbose {
        row.extend([Cell::Num(p.pole_part), Cell::Num(p.cut_part)]);
    }
    row
}

fn model_from(c: &Common) -> Result<Model> {
    Ok(Model::new(TwoLevelParams::with_servers(c.r, c.nu, c.servers)?))
}

fn no_wait(doc: &mut Document, c: &Common) -> Result<()> {
    doc.meta.insert("no_wait_probability".into(), json!(no_wait_probability(c.servers, c.r)?));
    Ok(())
}

pub fn marginal(a: &MarginalArgs) -> Result<()> {
    let start = Instant::now();
    let c = &a.common;
    let model = model_from(c)?;
    let opts = quadrature_options(c.tol, c.max_refinements)?;
    let seq = model.p_lo_sequence(a.n_max, c.engine.into(), &opts)?;

    let mut stats = Stats::default();
    let mut table = Table::new(&pmf_columns(c.verbose));
    for (n, p) in seq.iter().enumerate() {
        stats.add(p);
        table.push(pmf_row(Cell::Empty, Cell::Int(n), p, c.verbose));
    }
    for ell in 0..=a.n_max {
        let mut row = vec![Cell::Int(ell), Cell::Empty, Cell::Num(model.p_hi(ell))];
        if c.verbose {
            row.extend([Cell::Empty, Cell::Empty]);
        }
        table.push(row);
    }

    let mut doc = Document::new("marginal", params_block(c));
    doc.tables.push(("marginal", table));
    stats.write(&mut doc.meta);
    no_wait(&mut doc, c)?;
    finish(&mut doc, start);
    emit(&doc, c.format, c.out.as_deref())
}

/// `all`, or a list of indices and inclusive ranges such as `0-14,100` or `0..14`.
fn parse_sections(text: &str, l_max: usize) -> Result<Vec<usize>> {
    if text == "all" {
        return Ok((0..=l_max).collect());
    }
    let mut out = BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || usage(format!("cannot read section '{part}'"));
        let (lo, hi) = match part.split_once("..").or_else(|| part.split_once('-')) {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let v: usize = part.parse().map_err(|_| bad())?;
                (v, v)
            }
        };
        if lo > hi || hi > l_max {
            return Err(usage(format!("section '{part}' is outside 0..={l_max}")));
        }
        out.extend(lo..=hi);
    }
    Ok(out.into_iter().collect())
}

pub fn joint(a: &JointArgs) -> Result<()> {
    let start = Instant::now();
    let c = &a.common;
    if c.format == Format::Csv && a.levels && a.cdf_sections.is_some() {
        return Err(usage("CSV output holds one table; choose --levels or --cdf-sections"));
    }
    let model = model_from(c)?;
    let opts = quadrature_options(c.tol, c.max_refinements)?;
    let sections = a.cdf_sections.as_deref().map(|s| parse_sections(s, a.l_max)).transpose()?;
    let grid = model.joint_grid(a.l_max, a.m_max, c.engine.into(), &opts)?;

    let mut stats = Stats::default();
    let mut table = Table::new(&pmf_columns(c.verbose));
    for (ix, p) in grid.iter() {
        stats.add(p);
        table.push(pmf_row(Cell::Int(ix.ell), Cell::Int(ix.m), p, c.verbose));
    }
    let mut doc = Document::new("joint", params_block(c));
    doc.tables.push(("grid", table));

    if let Some(sections) = sections {
        let mut t = Table::new(&["index_hi", "index_lo", "cdf"]);
        for ell in sections {
            let mut acc = 0.0;
            for (m, p) in grid.row(ell).iter().enumerate() {
                acc += p.value;
                t.push(vec![Cell::Int(ell), Cell::Int(m), Cell::Num(acc)]);
            }
        }
        doc.tables.push(("cdf_sections", t));
        doc.csv_table = doc.tables.len() - 1;
    }
    if a.levels {
        let mut t = Table::new(&["index_lo", "index_hi", "log10_probability"]);
        for (ix, p) in grid.iter() {
            if p.value >= a.p_lim && p.value > 0.0 {
                t.push(vec![Cell::Int(ix.m), Cell::Int(ix.ell), Cell::Num(p.value.log10())]);
            }
        }
        doc.extra.insert("level_p_lim".into(), json!(a.p_lim));
        doc.tables.push(("level_sets", t));
        doc.csv_table = doc.tables.len() - 1;
    }

    doc.params.insert("l_max".into(), json!(a.l_max));
    doc.params.insert("m_max".into(), json!(a.m_max));
    stats.write(&mut doc.meta);
    no_wait(&mut doc, c)?;
    finish(&mut doc, start);
    emit(&doc, c.format, c.out.as_deref())
}

/// `start:step:stop` or a comma-separated list.
fn parse_times(text: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("cannot read time grid '{text}'"));
    let ts: Vec<f64> = if let [a, h, b] = text.split(':').collect::<Vec<_>>()[..] {
        let (a, h, b): (f64, f64, f64) = (
            a.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        );
        let ordered = h > 0.0 && b >= a;
        if !ordered {
            return Err(bad());
        }
        // A small allowance keeps `stop` when the step does not divide the span exactly.
        let count = ((b - a) / h + 1e-9).floor() as usize + 1;
        (0..count).map(|i| a + i as f64 * h).collect()
    } else {
        text.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(usage(format!("time grid '{text}' must hold finite non-negative times")));
    }
    Ok(ts)
}

pub fn wait(a: &WaitArgs) -> Result<()> {
    let start = Instant::now();
    let opts = quadrature_options(a.tol, a.max_refinements)?;
    let levels = MultiLevelParams::new(a.levels.clone())?;
    let kappa = a.kappa.unwrap_or(a.levels.len());
    let model = levels.effective(kappa)?;
    let ts = parse_times(&a.t_grid)?;
    let split = a.verbose && a.method == WaitMethod::Integral;

    let mut cols = vec!["t", "density"];
    if split {
        cols.extend(["pole", "cut"]);
    }
    let mut table = Table::new(&cols);
    let mut stats = Stats::default();
    let origin = match a.method {
        WaitMethod::Integral => {
            for &t in &ts {
                let p = model.waiting_pdf(t, &opts)?;
                stats.add(&p);
                let mut row = vec![Cell::Num(t), Cell::Num(p.value)];
                if split {
                    row.extend([Cell::Num(p.pole_part), Cell::Num(p.cut_part)]);
                }
                table.push(row);
            }
            model.waiting_pdf(0.0, &opts)?.value
        }
        WaitMethod::Laguerre => {
            let coeffs = model.laguerre_coeffs(a.terms, &opts)?;
            for &t in &ts {
                table.push(vec![Cell::Num(t), Cell::Num(waiting_pdf_laguerre(t, &coeffs)?)]);
            }
            waiting_pdf_laguerre(0.0, &coeffs)?
        }
    };

    let r = model.r();
    let mut params = Map::new();
    params.insert("levels".into(), json!(a.levels));
    params.insert("kappa".into(), json!(kappa));
    params.insert("r".into(), json!(r));
    params.insert("nu".into(), json!(model.params.nu()));
    params.insert("method".into(), json!(if a.method == WaitMethod::Integral { "integral" } else { "laguerre" }));
    if a.method == WaitMethod::Laguerre {
        params.insert("terms".into(), json!(a.terms));
    }
    params.insert("tol".into(), json!(a.tol));

    let mut doc = Document::new("waiting_time", params);
    doc.extra
        .insert("origin".into(), json!({ "density": origin, "one_minus_r": 1.0 - r, "deviation": origin - (1.0 - r) }));
    doc.tables.push(("density", table));
    if a.method == WaitMethod::Integral {
        stats.write(&mut doc.meta);
    }
    finish(&mut doc, start);
    emit(&doc, a.format, a.out.as_deref())
}

fn sweep_nus(a: &ValidateArgs) -> Result<Vec<f64>> {
    match a.nu_sweep.as_str() {
        "grid" => Ok(nu_grid(a.r)),
        "single" => Ok(vec![a.nu.ok_or_else(|| usage("--nu-sweep single needs --nu"))?]),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| usage(format!("cannot read fraction '{s}'"))))
            .collect(),
    }
}

pub fn validate(a: &ValidateArgs) -> Result<()> {
    let start = Instant::now();
    let opts = quadrature_options(a.tol, npq::quadrature::DEFAULT_MAX_REFINEMENTS)?;
    // Checks the intensity before any sweep starts.
    TwoLevelParams::new(a.r, 0.0)?;
    let nus = sweep_nus(a)?;
    let engine: Engine = a.engine.into();
    let all = a.tests.contains(&TestArg::All);
    let wants = |t: TestArg| all || a.tests.contains(&t);
    let p_lim = a.p_lim.unwrap_or(DEFAULT_P_LIM);
    let p_lim_agg = a.p_lim.unwrap_or(DEFAULT_P_LIM_AGGREGATION);
    let quad = MarginalSource::Engine(Engine::Quadrature);
    let exact = MarginalSource::Engine(Engine::Exact);

    type Job<'a> = (&'static str, Box<dyn Fn(&Model) -> npq::Result<MopReport<f64>> + Sync + 'a>);
    let mut jobs: Vec<Job> = Vec::new();
    if wants(TestArg::Pairwise) {
        match a.against {
            Against::Engine => {
                jobs.push(("pairwise", Box::new(|m: &Model| m.mop_pairwise(quad, exact, p_lim, a.n_lim, &opts))));
            }
            Against::Oracle => {
                for src in [quad, exact] {
                    jobs.push((
                        "pairwise",
                        Box::new(move |m: &Model| m.mop_pairwise(src, MarginalSource::Oracle, p_lim, a.n_lim, &opts)),
                    ));
                }
            }
        }
    }
    if wants(TestArg::Agg) {
        jobs.push(("aggregation", Box::new(|m: &Model| m.mop_aggregation(engine, p_lim_agg, a.n_lim, &opts))));
    }
    if wants(TestArg::Xhi) {
        jobs.push(("xhi", Box::new(|m: &Model| m.mop_xhi(engine, p_lim, a.n_lim, &opts))));
    }
    if wants(TestArg::Xlo) {
        let marginal = match a.against {
            Against::Engine => MarginalSource::Engine(engine),
            Against::Oracle => MarginalSource::Oracle,
        };
        jobs.push(("xlo", Box::new(move |m: &Model| m.mop_xlo(engine, marginal, p_lim, a.n_lim, &opts))));
    }

    let mut table = Table::new(&["nu", "test", "method_a", "method_b", "mop", "n_max_sampled", "p_lim", "status"]);
    let mut below = 0;
    let mut hard: Option<npq::Error> = None;
    let mut worst: Map<String, Value> = Map::new();
    for (name, job) in &jobs {
        for (nu, res) in sweep_points(a.r, &nus, job) {
            let row = match res {
                Ok(rep) => {
                    let ok = rep.value >= a.min_mop;
                    below += usize::from(!ok);
                    let w = worst.entry(*name).or_insert(json!(rep.value));
                    if rep.value < w.as_f64().unwrap_or(f64::INFINITY) {
                        *w = json!(rep.value);
                    }
                    vec![
                        Cell::Num(nu),
                        Cell::Text(name.to_string()),
                        Cell::Text(rep.methods.0),
                        Cell::Text(rep.methods.1),
                        Cell::Num(rep.value),
                        Cell::Int(rep.n_max_sampled),
                        Cell::Num(rep.p_lim),
                        Cell::Text(if ok { "ok" } else { "below" }.into()),
                    ]
                }
                Err(npq::Error::EmptyComparison { p_lim }) => vec![
                    Cell::Num(nu),
                    Cell::Text(name.to_string()),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Num(p_lim),
                    Cell::Text("empty".into()),
                ],
                Err(e) => {
                    let msg = e.to_string();
                    hard.get_or_insert(e);
                    vec![
                        Cell::Num(nu),
                        Cell::Text(name.to_string()),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Text(format!("error: {msg}")),
                    ]
                }
            };
            table.push(row);
        }
    }

    let mut params = Map::new();
    params.insert("r".into(), json!(a.r));
    params.insert("nu_sweep".into(), json!(nus));
    params.insert("engine".into(), json!(engine_name(engine)));
    params.insert("against".into(), json!(if a.against == Against::Oracle { "oracle" } else { "engine" }));
    params.insert("n_lim".into(), json!(a.n_lim));
    params.insert("min_mop".into(), json!(a.min_mop));
    params.insert("tol".into(), json!(a.tol));

    let mut doc = Document::new("validation", params);
    doc.extra.insert("minimum_by_test".into(), Value::Object(worst));
    doc.extra.insert("below_min_mop".into(), json!(below));
    doc.tables.push(("mop", table));
    finish(&mut doc, start);
    emit(&doc, a.format, a.out.as_deref())?;

    if let Some(e) = hard {
        return Err(e.into());
    }
    if below > 0 {
        return Err(MopFailure { count: below, min_mop: a.min_mop }.into());
    }
    Ok(())
}
