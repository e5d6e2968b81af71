use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use vhsim_core::content::{
    builtin_policies, generate_balanced_corpus, placeholder_few_shot, save_news_corpus, save_policy_catalog,
    save_risk_series, synthetic_risk_series, ContentError,
};
use vhsim_core::engine::config::PolicyChoice;
use vhsim_core::engine::{end_hesitancy, run_batch, warmup_hesitancy, BatchResult, RunRecord, SharedInputs, SimulationConfig};
use vhsim_core::eval::rank::{agreements_csv, borda_aggregate, compare_to, RankingTable};
use vhsim_core::eval::report::AnalysisScope;
use vhsim_core::eval::{
    analysis_report, csv, judge::judge_csv, mae_vs_reference, p1_align, p2_effort_gap, p3_stance_gap, p4_judge,
    run_log_name, EngineRunner, ReferenceSeries, P1_GRID,
};
use vhsim_core::llm::Gateway;
use vhsim_core::persona::{sample_population, DemographicMarginals};
use vhsim_core::rng::{stream, Purpose};
use vhsim_core::socialnet::{generate_network, save_edges, SocialNetError};

use crate::{Cli, CliError, Command, Common, EvalCommand, Overrides, ScopeArg};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
const INIT_FILES: [&str; 5] = ["config.toml", "marginals.toml", "policies.jsonl", "risk.csv", "few_shot.txt"];

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Init { dir, force } => init(dir, *force, common),
        Command::GenNetwork { output } => gen_network(common, output.as_deref()),
        Command::GenNews { per_stance, output } => gen_news(common, *per_stance, output.as_deref()),
        Command::Run { overrides, policy, effort } => {
            let mut config = load_config(common)?;
            if let (Some(c), Some(e)) = (policy, effort) {
                config.policy = Some(PolicyChoice { category: (*c).into(), effort: (*e).into(), catalog: None });
            }
            if overrides.seeds.is_none() {
                if let Some(seed) = common.seed {
                    config.seeds = vec![seed];
                }
            }
            apply(&mut config, overrides)?;
            run(common, config)
        }
        Command::Eval { protocol } => eval(common, protocol),
        Command::RankCompare { table, reference, borda } => rank_compare(common, table.as_deref(), reference, *borda),
        Command::Report { logs, scope, agents, reference } => {
            report(common, logs.as_deref(), *scope, *agents, reference.as_deref())
        }
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn load_config(common: &Common) -> Result<SimulationConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => SimulationConfig::load(path)?,
        None => SimulationConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(b) = common.backend {
        config.llm.backend = b.into();
    }
    config.validate()?;
    Ok(config)
}

fn apply(config: &mut SimulationConfig, o: &Overrides) -> Result<(), CliError> {
    if let Some(seeds) = &o.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(path) = &o.catalog {
        config.policy_catalog = Some(path.clone());
    }
    if let Some(mix) = o.mix {
        config.news.mix = mix;
    }
    if let Some(n) = o.agents {
        config.n_agents = n;
    }
    if let Some(steps) = o.steps {
        config.steps = steps;
    }
    if let Some(w) = o.warmup {
        config.warmup = w;
    }
    if let Some(t) = o.temperature {
        config.temperature = t;
    }
    config.validate()?;
    Ok(())
}

/// Creates the output tree and writes the effective config before anything runs.
fn prepare_out(common: &Common, config: &SimulationConfig) -> Result<(), CliError> {
    for sub in ["logs", "metrics", "reports"] {
        let dir = common.out.join(sub);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
    }
    let path = common.out.join(CONFIG_SNAPSHOT);
    let mut snapshot = config.clone();
    // absolute paths keep the snapshot valid wherever it is read from
    if let Ok(cwd) = std::env::current_dir() {
        snapshot.resolve_paths(&cwd);
    }
    snapshot.save(&path)?;
    Ok(())
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    Ok(csv::write(dir, name, text)?)
}

fn init(dir: &Path, force: bool, common: &Common) -> Result<(), CliError> {
    if dir.exists() {
        let nonempty = fs::read_dir(dir).map_err(io(dir))?.next().is_some();
        if nonempty && !force {
            return Err(CliError::Config(format!("{} is not empty; pass --force to overwrite", dir.display())));
        }
    }
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut config = SimulationConfig::default();
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(b) = common.backend {
        config.llm.backend = b.into();
    }
    config.population.marginals = Some("marginals.toml".into());
    config.policy_catalog = Some("policies.jsonl".into());
    config.risk.series = Some("risk.csv".into());
    config.news.few_shot = Some("few_shot.txt".into());
    config.save(&dir.join(INIT_FILES[0]))?;

    let marginals = dir.join(INIT_FILES[1]);
    fs::write(&marginals, DemographicMarginals::bundled().to_toml_string()).map_err(io(&marginals))?;
    save_policy_catalog(&builtin_policies(), &dir.join(INIT_FILES[2]))?;
    let risk = synthetic_risk_series(config.steps, &config.risk.shape, &mut stream(config.seed, Purpose::Risk, &[]))?;
    save_risk_series(&risk, &dir.join(INIT_FILES[3]))?;
    let few = dir.join(INIT_FILES[4]);
    fs::write(&few, placeholder_few_shot().join("\n") + "\n").map_err(io(&few))?;
    for f in INIT_FILES {
        println!("{}", dir.join(f).display());
    }
    Ok(())
}

fn gen_network(common: &Common, output: Option<&Path>) -> Result<(), CliError> {
    let config = load_config(common)?;
    prepare_out(common, &config)?;
    let gateway = config.llm.gateway()?;
    let marginals = match &config.population.marginals {
        Some(path) => vhsim_core::persona::load_marginals(path).map_err(|e| CliError::Config(e.to_string()))?.0,
        None => DemographicMarginals::bundled(),
    };
    let personas = sample_population(&marginals, config.n_agents, config.seed);
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| common.out.join("network").join("edges.txt"));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    let personas_path = path.with_extension("personas.jsonl");
    let lines: String = personas
        .iter()
        .map(|p| serde_json::to_string(p).expect("serializable") + "\n")
        .collect();
    fs::write(&personas_path, lines).map_err(io(&personas_path))?;
    let (graph, report) = match generate_network(&personas, &gateway, config.seed, config.execution.effective()) {
        Ok(ok) => ok,
        Err(SocialNetError::Provider { agent, source, partial, report }) => {
            save_edges(&partial, &path)?;
            write_drop_report(common, &report.dropped)?;
            return Err(SocialNetError::Provider { agent, source, partial, report }.into());
        }
        Err(e) => return Err(e.into()),
    };
    save_edges(&graph, &path)?;
    write_drop_report(common, &report.dropped)?;
    println!("{} edges among {} agents ({} tokens dropped) -> {}", graph.len(), config.n_agents, report.total_dropped(), path.display());
    Ok(())
}

fn write_drop_report(common: &Common, dropped: &[Option<usize>]) -> Result<(), CliError> {
    let mut text = String::from("agent,dropped,failed\n");
    for (i, d) in dropped.iter().enumerate() {
        text.push_str(&format!("{i},{},{}\n", d.unwrap_or(0), d.is_none()));
    }
    write(&common.out.join("metrics"), "network_report.csv", &text)?;
    Ok(())
}

fn gen_news(common: &Common, per_stance: Option<usize>, output: Option<&Path>) -> Result<(), CliError> {
    let mut config = load_config(common)?;
    if let Some(n) = per_stance {
        config.news.generate_per_stance = n;
    }
    prepare_out(common, &config)?;
    let gateway = config.llm.gateway()?;
    let few_shot = match &config.news.few_shot {
        Some(path) => fs::read_to_string(path)
            .map_err(io(path))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect(),
        None => placeholder_few_shot(),
    };
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| common.out.join("news").join("corpus.jsonl"));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    let mode = config.execution.effective();
    match generate_balanced_corpus(&gateway, config.news.generate_per_stance, &few_shot, config.seed, mode) {
        Ok(items) => {
            save_news_corpus(&items, &path)?;
            println!("{} news items -> {}", items.len(), path.display());
            Ok(())
        }
        Err(ContentError::Generation { index, source, partial }) => {
            save_news_corpus(&partial, &path)?;
            eprintln!("saved {} items before the failure to {}", partial.len(), path.display());
            Err(ContentError::Generation { index, source, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn save_batch(common: &Common, label: &str, batch: &BatchResult) -> Result<(), CliError> {
    let dir = common.out.join("logs");
    for r in &batch.records {
        r.save(&dir.join(run_log_name(label, r.seed())))?;
        r.save_meta(&dir.join(format!("{label}_seed{}.meta.json", r.seed())))?;
    }
    Ok(())
}

fn save_cache(config: &SimulationConfig, shared: Option<&SharedInputs>) {
    if let (Some(path), Some(shared)) = (&config.embedding.cache, shared) {
        if let Err(e) = shared.embedder.save(path) {
            log::warn!("could not save embedding cache to {}: {e}", path.display());
        }
    }
}

fn write_batch_metrics(common: &Common, batches: &[(String, BatchResult)]) -> Result<(), CliError> {
    let dir = common.out.join("metrics");
    write(&dir, "runs.csv", &csv::runs(batches))?;
    write(&dir, "trajectories.csv", &csv::trajectories(batches))?;
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn run(common: &Common, config: SimulationConfig) -> Result<(), CliError> {
    prepare_out(common, &config)?;
    let gateway = config.llm.gateway()?;
    let shared = SharedInputs::prepare(&config, &gateway)?;
    let batch = run_batch(&config, &shared, &gateway, &config.seeds)?;
    save_cache(&config, Some(&shared));
    save_batch(common, "run", &batch)?;
    let batches = vec![("run".to_string(), batch)];
    write_batch_metrics(common, &batches)?;
    let batch = &batches[0].1;
    println!("seed,status,h_w,h_l");
    for r in &batch.records {
        let status = if r.is_complete() { "completed" } else { "aborted" };
        println!("{},{status},{},{}", r.seed(), fmt_opt(warmup_hesitancy(r).ok()), fmt_opt(end_hesitancy(r).ok()));
    }
    if batch.partial {
        let errors: Vec<String> = batch.records.iter().filter_map(|r| r.end.error.clone()).collect();
        return Err(CliError::Provider(format!("aborted runs: {}", errors.join("; "))));
    }
    Ok(())
}

fn eval(common: &Common, protocol: &EvalCommand) -> Result<(), CliError> {
    let mut config = load_config(common)?;
    if let EvalCommand::P4 { logs, agents, episodes } = protocol {
        prepare_out(common, &config)?;
        let records = load_logs(&logs_dir(common, logs.as_deref()))?;
        let gateway = config.llm.gateway()?;
        let reports = p4_judge(
            &records.into_iter().flat_map(|(_, b)| b.records).collect::<Vec<_>>(),
            &gateway,
            *agents,
            *episodes,
            config.seed,
            config.llm.judge_temperature,
            config.execution.effective(),
        )?;
        write(&common.out.join("metrics"), "judge.csv", &judge_csv(&reports))?;
        let json = serde_json::to_string_pretty(&reports).expect("serializable");
        write(&common.out.join("reports"), "judge.json", &json)?;
        print!("{}", judge_csv(&reports));
        if reports.iter().all(|r| r.failed) {
            return Err(CliError::Protocol("no judge reply could be parsed".into()));
        }
        return Ok(());
    }
    let overrides = match protocol {
        EvalCommand::P1 { overrides, .. } | EvalCommand::P2 { overrides, .. } | EvalCommand::P3 { overrides } => overrides,
        EvalCommand::P4 { .. } => unreachable!("handled above"),
    };
    apply(&mut config, overrides)?;
    prepare_out(common, &config)?;
    let gateway = config.llm.gateway()?;
    let mut runner = EngineRunner::new(&gateway).with_log_dir(common.out.join("logs"));
    let metrics = common.out.join("metrics");
    let result = match protocol {
        EvalCommand::P1 { grid, target, .. } => {
            let grid = grid.clone().unwrap_or_else(|| P1_GRID.to_vec());
            p1_align(&config, &grid, *target, &mut runner).map(|r| {
                let text = csv::p1(&r);
                println!("best temperature {}", r.best_temperature);
                ("p1.csv", text)
            })
        }
        EvalCommand::P2 { category, .. } => p2_effort_gap(&config, (*category).into(), &mut runner).map(|r| {
            println!("delta_h weak {:.4} strong {:.4} gap {:.4}", r.delta_weak, r.delta_strong, r.gap);
            ("p2.csv", csv::p2(&r))
        }),
        EvalCommand::P3 { .. } => p3_stance_gap(&config, &mut runner).map(|r| {
            println!("drift neg {:.4} pos {:.4} gap {:.4}", r.drift_negative, r.drift_positive, r.gap);
            ("p3.csv", csv::p3(&r))
        }),
        EvalCommand::P4 { .. } => unreachable!("handled above"),
    };
    // batch tables are written even when the protocol itself fails
    write_batch_metrics(common, &runner.history)?;
    let (name, text) = result?;
    write(&metrics, name, &text)?;
    print!("{text}");
    Ok(())
}

fn rank_compare(common: &Common, table: Option<&Path>, reference: &str, borda: bool) -> Result<(), CliError> {
    let mut table = match table {
        Some(path) => RankingTable::parse_csv(&fs::read_to_string(path).map_err(io(path))?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => RankingTable::bundled(),
    };
    if table.column(reference).is_none() {
        return Err(CliError::Config(format!("no column `{reference}` in the ranking table")));
    }
    if borda {
        let voters: Vec<_> = table.columns.iter().filter(|(n, _)| n != reference).map(|(_, r)| r.clone()).collect();
        let aggregate = borda_aggregate(&voters).map_err(|e| CliError::Protocol(e.to_string()))?;
        table.columns.push(("Borda".into(), aggregate));
    }
    let rows = compare_to(&table, reference).map_err(|e| CliError::Protocol(e.to_string()))?;
    let text = agreements_csv(&rows);
    write(&common.out.join("metrics"), "rank_agreement.csv", &text)?;
    print!("{text}");
    Ok(())
}

fn logs_dir(common: &Common, logs: Option<&Path>) -> PathBuf {
    logs.map(Path::to_path_buf).unwrap_or_else(|| common.out.join("logs"))
}

/// Run logs grouped by the batch label in their file names.
fn load_logs(dir: &Path) -> Result<Vec<(String, BatchResult)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Config(format!("no run logs in {}", dir.display())));
    }
    let mut groups: BTreeMap<String, Vec<RunRecord>> = BTreeMap::new();
    for p in paths {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = stem.rsplit_once("_seed").map_or(stem.clone(), |(l, _)| l.to_string());
        groups.entry(label).or_default().push(RunRecord::load(&p)?);
    }
    Ok(groups
        .into_iter()
        .map(|(label, mut records)| {
            records.sort_by_key(RunRecord::seed);
            let partial = records.iter().any(|r| !r.is_complete());
            (label, BatchResult { records, partial })
        })
        .collect())
}

fn report(
    common: &Common,
    logs: Option<&Path>,
    scope: ScopeArg,
    agents: usize,
    reference: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(common)?;
    prepare_out(common, &config)?;
    let batches = load_logs(&logs_dir(common, logs))?;
    write_batch_metrics(common, &batches)?;
    if let Some(path) = reference {
        let series = ReferenceSeries::load(path)?;
        let mut text = String::from("batch,seed,mae_pp\n");
        for (label, b) in &batches {
            for r in &b.records {
                let mae = mae_vs_reference(&r.trajectory(), &series)?;
                text.push_str(&format!("{label},{},{mae:.6}\n", r.seed()));
            }
        }
        write(&common.out.join("metrics"), "mae.csv", &text)?;
        print!("{text}");
    }
    if agents == 0 {
        return Ok(());
    }
    let gateway: Gateway = config.llm.gateway()?;
    let scope = match scope {
        ScopeArg::PerAgent => AnalysisScope::PerAgent,
        ScopeArg::Meta => AnalysisScope::Meta,
    };
    let records: Vec<RunRecord> = batches.into_iter().flat_map(|(_, b)| b.records).collect();
    let analysis = analysis_report(
        &records,
        &gateway,
        scope,
        agents,
        config.seed,
        config.llm.agent_temperature,
        config.execution.effective(),
    );
    let reports = common.out.join("reports");
    write(&reports, "analysis.txt", &analysis.to_text())?;
    write(&reports, "analysis.json", &serde_json::to_string_pretty(&analysis).expect("serializable"))?;
    println!("{} analysis sections -> {}", analysis.sections.len() + usize::from(analysis.meta.is_some()), reports.display());
    if analysis.failures() > 0 {
        return Err(CliError::Provider(format!("{} analysis sections failed", analysis.failures())));
    }
    Ok(())
}
