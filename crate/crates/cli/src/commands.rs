use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use ucrec_core::data::synth::{generate, read_names, SynthConfig};
use ucrec_core::data::{filter, ingest, split, Config, Format, SplitDataset};
use ucrec_core::engine::{
    explain_retrospective, prospective_preview, render_explanation, ExplanationRecord, Method, RetroRequest,
};
use ucrec_core::eval::{
    ablation_sweep, evaluate_model, evaluate_popularity, prospective_simulation, retrospective_eval, RetroEvalConfig,
    SweepParam,
};
use ucrec_core::model::{persist, train};
use ucrec_core::{recommend_top_k, ItemId, MaskVector, ScorerParams, SequenceWindow, UserId};
use ucrec_service::{Service, Settings};

use crate::args::{Cli, Command, Common};
use crate::output::Outputs;

/// Errors that map to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const MODEL_FILE: &str = "model.ucr";
pub const IDMAP_FILE: &str = "idmap.txt";
pub const SPLIT_FILE: &str = "split.txt";

struct Ctx {
    cfg: Config,
    /// Directory relative paths in the config file resolve against.
    base: PathBuf,
    common: Common,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = context(cli.common)?;
    match cli.command {
        Command::Train => cmd_train(&ctx),
        Command::Recommend { user } => cmd_recommend(&ctx, &user),
        Command::ExplainRetro { user, item, json } => cmd_explain_retro(&ctx, &user, &item, json),
        Command::ExplainPro { user, item, json } => cmd_explain_pro(&ctx, &user, &item, json),
        Command::EvalRetro => cmd_eval_retro(&ctx),
        Command::EvalPro => cmd_eval_pro(&ctx),
        Command::Ablate { param, values } => cmd_ablate(&ctx, &param, &values),
        Command::Serve => cmd_serve(&ctx),
        Command::Synth { users, items } => cmd_synth(&ctx, users, items),
    }
}

fn context(common: Common) -> anyhow::Result<Ctx> {
    let (mut cfg, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let cfg = Config::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (Config::default(), PathBuf::new()),
    };
    cfg.apply_overrides(&common.set).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = common.k {
        cfg.k = k;
    }
    if let Some(n) = common.sample_size {
        cfg.sample_size = n;
    }
    if let Some(m) = common.m {
        cfg.simulation_size = m;
    }
    if let Some(j) = common.jobs {
        cfg.jobs = j;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(Ctx { cfg, base, common })
}

impl Ctx {
    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn data_path(&self) -> anyhow::Result<&Path> {
        self.common
            .data
            .as_deref()
            .ok_or_else(|| usage("--data is required: pass the interaction file"))
    }

    fn model_path(&self) -> anyhow::Result<&Path> {
        self.common
            .model
            .as_deref()
            .ok_or_else(|| usage("--model is required: pass a model file written by `ucrec train`"))
    }

    fn out_dir(&self) -> anyhow::Result<&Path> {
        self.common
            .out
            .as_deref()
            .ok_or_else(|| usage("--out is required: pass an output directory"))
    }

    fn methods(&self, default: &[Method]) -> anyhow::Result<Vec<Method>> {
        match &self.common.method {
            None => Ok(default.to_vec()),
            Some(list) => list
                .split(',')
                .map(|m| m.parse::<Method>().map_err(|e| usage(e.to_string())))
                .collect(),
        }
    }

    fn method(&self) -> anyhow::Result<Method> {
        match &self.common.method {
            None => Ok(self.cfg.method),
            Some(m) => m.parse().map_err(|e: ucrec_core::Error| usage(e.to_string())),
        }
    }

    fn names(&self) -> anyhow::Result<HashMap<String, String>> {
        match &self.cfg.names {
            None => Ok(HashMap::new()),
            Some(p) => {
                let path = self.resolve(p);
                read_names(&path).with_context(|| format!("cannot read item names {}", path.display()))
            }
        }
    }

    fn retro_config(&self, methods: Vec<Method>) -> RetroEvalConfig {
        RetroEvalConfig {
            methods,
            k_values: self.cfg.k_values.clone(),
            sample_size: self.cfg.sample_size,
            seed: self.cfg.seed,
            hyper: self.cfg.retro_hyper(),
            exclude_history: self.cfg.exclude_history,
            jobs: self.cfg.jobs,
        }
    }
}

/// Fails early when a model is needed but missing, before the slower
/// dataset load.
fn load_inputs(ctx: &Ctx) -> anyhow::Result<(SplitDataset, ScorerParams)> {
    let model = ctx.model_path()?;
    if !model.exists() {
        bail!("model {} does not exist; run `ucrec train` first", model.display());
    }
    let data = load_dataset(ctx)?;
    let params = load_model(ctx, &data)?;
    Ok((data, params))
}

fn load_dataset(ctx: &Ctx) -> anyhow::Result<SplitDataset> {
    let path = ctx.data_path()?;
    if !path.exists() {
        bail!("dataset {} does not exist", path.display());
    }
    let format: Format = ctx.cfg.format.parse().map_err(|e: ucrec_core::Error| usage(e.to_string()))?;
    let t = Instant::now();
    let (log, summary) = ingest(path, format).with_context(|| format!("cannot ingest {}", path.display()))?;
    log::info!(
        "ingest: {} records, {} duplicates, {} users, {} items in {:?}",
        summary.records,
        summary.duplicates,
        summary.users,
        summary.items,
        t.elapsed()
    );
    let t = Instant::now();
    let (log, fs) = filter(&log, ctx.cfg.min_user_interactions, ctx.cfg.min_item_interactions)?;
    log::info!(
        "filter: removed {} users, {} items, {} interactions in {} rounds ({:?})",
        fs.removed_users,
        fs.removed_items,
        fs.removed_interactions,
        fs.rounds,
        t.elapsed()
    );
    let t = Instant::now();
    let data = split(&log, ctx.cfg.simulation_size)?;
    log::info!(
        "split: {} users kept, {} too short, {} items ({:?})",
        data.users.len(),
        data.excluded_users.len(),
        data.n_items,
        t.elapsed()
    );
    Ok(data)
}

/// Loads the model and checks it against the dataset, including the id
/// map and split manifest saved next to it when present.
fn load_model(ctx: &Ctx, data: &SplitDataset) -> anyhow::Result<ScorerParams> {
    let path = ctx.model_path()?;
    if !path.exists() {
        bail!("model {} does not exist; run `ucrec train` first", path.display());
    }
    let params = persist::load(path).with_context(|| format!("cannot load model {}", path.display()))?;
    if params.n_items() != data.n_items {
        bail!(
            "model {} has {} items but the dataset has {}; was it trained on this data with the same filters?",
            path.display(),
            params.n_items(),
            data.n_items
        );
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let idmap = dir.join(IDMAP_FILE);
    if idmap.exists() {
        let saved = std::fs::read_to_string(&idmap)?;
        if saved != data.id_map.to_text() {
            bail!("{} does not match the dataset's id mapping", idmap.display());
        }
    }
    let manifest = dir.join(SPLIT_FILE);
    if manifest.exists() {
        let saved = std::fs::read_to_string(&manifest)?;
        data.verify_manifest(&saved)
            .with_context(|| format!("{} does not match the dataset split", manifest.display()))?;
    }
    Ok(params)
}

fn cmd_train(ctx: &Ctx) -> anyhow::Result<()> {
    let data = load_dataset(ctx)?;
    let mut out = Outputs::new(ctx.out_dir()?)?;
    let t = Instant::now();
    let (params, report) = train(ctx.cfg.scorer, data.n_items, &data.training_sequences(), &ctx.cfg.train_config())?;
    log::info!(
        "train: {} epochs, best {} (validation NDCG@10 {:.4}) in {:?}",
        report.epochs.len(),
        report.best_epoch,
        report.best_validation_ndcg,
        t.elapsed()
    );
    let test = evaluate_model(&params, &data, 10)?;
    let pop = evaluate_popularity(&data, params.window(), 10);
    println!(
        "test NDCG@10 {:.4} HR@10 {:.4} (popularity {:.4} / {:.4}) over {} users",
        test.ndcg, test.hit_rate, pop.ndcg, pop.hit_rate, test.users
    );
    let mut model = Vec::new();
    persist::write_model(&params, &mut model)?;
    out.write(MODEL_FILE, &model)?;
    out.write(IDMAP_FILE, data.id_map.to_text().as_bytes())?;
    out.write(SPLIT_FILE, data.manifest().as_bytes())?;
    out.write("config.toml", ctx.cfg.to_text().as_bytes())?;
    let summary = serde_json::json!({
        "train": report,
        "test": {"ndcg": test.ndcg, "hit_rate": test.hit_rate, "users": test.users},
        "popularity": {"ndcg": pop.ndcg, "hit_rate": pop.hit_rate},
    });
    out.write("train_report.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    out.commit();
    Ok(())
}

fn user_window(ctx: &Ctx, data: &SplitDataset, params: &ScorerParams, raw: &str) -> anyhow::Result<(UserId, SequenceWindow)> {
    let _ = ctx;
    let user = data
        .id_map
        .user(raw)
        .and_then(|u| data.user(u))
        .ok_or_else(|| anyhow::anyhow!("unknown user {raw}"))?;
    Ok((user.user, SequenceWindow::from_history(&user.sequence(), params.window())))
}

fn item_id(data: &SplitDataset, raw: &str) -> anyhow::Result<ItemId> {
    data.id_map.item(raw).ok_or_else(|| anyhow::anyhow!("unknown item {raw}"))
}

fn namer<'a>(data: &'a SplitDataset, names: &'a HashMap<String, String>) -> impl Fn(ItemId) -> String + 'a {
    move |i| {
        let raw = data.id_map.item_raw(i);
        names.get(raw).cloned().unwrap_or_else(|| format!("Item {raw}"))
    }
}

fn cmd_recommend(ctx: &Ctx, user: &str) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    let names = ctx.names()?;
    let name = namer(&data, &names);
    let (_, window) = user_window(ctx, &data, &params, user)?;
    let list = recommend_top_k(&params, &window, &MaskVector::binary(window.capacity()), ctx.cfg.k, ctx.cfg.exclude_history)?;
    println!("rank\titem\tscore\tname");
    for (r, &(item, score)) in list.entries.iter().enumerate() {
        println!("{}\t{}\t{score:.6}\t{}", r + 1, data.id_map.item_raw(item), name(item));
    }
    Ok(())
}

fn print_record(ctx: &Ctx, data: &SplitDataset, names: &HashMap<String, String>, user: UserId, rec: &ExplanationRecord, json: bool) {
    let name = namer(data, names);
    println!("{}", render_explanation(rec, &name, &ctx.cfg.interaction_verb));
    for &(t, item) in &rec.revoked {
        println!("  position {t}: {} ({})", name(item), data.id_map.item_raw(item));
    }
    if json {
        let raw = |i: ItemId| data.id_map.item_raw(i).to_string();
        let line = serde_json::json!({
            "user": data.id_map.user_raw(user),
            "kind": rec.kind,
            "method": rec.method,
            "target": rec.target.map(raw),
            "status": rec.status,
            "revoked": rec.revoked.iter().map(|&(t, i)| serde_json::json!({"position": t, "item": raw(i)})).collect::<Vec<_>>(),
            "added": rec.added_items.iter().map(|&i| raw(i)).collect::<Vec<_>>(),
            "iterations": rec.iterations,
        });
        println!("{line}");
    }
}

fn cmd_explain_retro(ctx: &Ctx, user: &str, item: &str, json: bool) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    let names = ctx.names()?;
    let method = ctx.method()?;
    let (uid, window) = user_window(ctx, &data, &params, user)?;
    let target = item_id(&data, item)?;
    let list = recommend_top_k(&params, &window, &MaskVector::binary(window.capacity()), ctx.cfg.k, ctx.cfg.exclude_history)?;
    if !list.contains(target) {
        let raws: Vec<&str> = list.entries.iter().map(|&(i, _)| data.id_map.item_raw(i)).collect();
        bail!("item {item} is not in user {user}'s top-{} list ({})", ctx.cfg.k, raws.join(", "));
    }
    let req = RetroRequest::new(window, target, ctx.cfg.k)
        .with_hyper(ctx.cfg.retro_hyper())
        .with_exclude_history(ctx.cfg.exclude_history);
    let t = Instant::now();
    let rec = explain_retrospective(&params, &req, method, ctx.cfg.seed)?;
    log::info!("{method} explanation in {:?}: {:?} after {} iterations", t.elapsed(), rec.status, rec.iterations);
    print_record(ctx, &data, &names, uid, &rec, json);
    Ok(())
}

fn cmd_explain_pro(ctx: &Ctx, user: &str, item: &str, json: bool) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    let names = ctx.names()?;
    let (uid, window) = user_window(ctx, &data, &params, user)?;
    let item = item_id(&data, item)?;
    let mask = MaskVector::binary(window.capacity());
    let preview = prospective_preview(&params, &window, &mask, item, ctx.cfg.k, ctx.cfg.exclude_history)?;
    print_record(ctx, &data, &names, uid, &preview.record, json);
    Ok(())
}

fn cmd_eval_retro(ctx: &Ctx) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    let config = ctx.retro_config(ctx.methods(&Method::ALL)?);
    let mut out = ctx.common.out.as_deref().map(Outputs::new).transpose()?;
    let t = Instant::now();
    let report = retrospective_eval(&params, &data, &config)?;
    let attempts = report.rows.len().max(1);
    log::info!(
        "eval-retro: {} explanations in {:?} ({:?} each)",
        report.rows.len(),
        t.elapsed(),
        t.elapsed() / attempts as u32
    );
    print!("{}", report.table());
    if let Some(out) = out.as_mut() {
        out.write("retro_rows.csv", report.rows_csv_raw(&data.id_map).as_bytes())?;
        out.write("retro_summary.csv", report.summary_csv().as_bytes())?;
    }
    if let Some(out) = out {
        out.commit();
    }
    Ok(())
}

fn cmd_eval_pro(ctx: &Ctx) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    let mut out = ctx.common.out.as_deref().map(Outputs::new).transpose()?;
    let t = Instant::now();
    let report = prospective_simulation(&params, &data, ctx.cfg.k, 10, ctx.cfg.jobs)?;
    log::info!("eval-pro: {} users in {:?}", report.rows.len(), t.elapsed());
    print!("{}", report.table());
    if let Some(out) = out.as_mut() {
        out.write("pro_rows.csv", report.rows_csv_raw(&data.id_map).as_bytes())?;
        out.write("pro_summary.csv", report.summary_csv().as_bytes())?;
    }
    if let Some(out) = out {
        out.commit();
    }
    Ok(())
}

fn cmd_ablate(ctx: &Ctx, param: &str, values: &[f64]) -> anyhow::Result<()> {
    let param: SweepParam = param.parse().map_err(|e: ucrec_core::Error| usage(e.to_string()))?;
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(usage("sweep values must be finite and non-negative"));
    }
    let (data, params) = load_inputs(ctx)?;
    let mut out = ctx.common.out.as_deref().map(Outputs::new).transpose()?;
    let base = ctx.retro_config(vec![param.method()]);
    let t = Instant::now();
    let report = ablation_sweep(&params, &data, param, values, &base)?;
    log::info!("ablate {}: {} values in {:?}", param.as_str(), values.len(), t.elapsed());
    let csv = report.to_csv();
    print!("{csv}");
    if let Some(out) = out.as_mut() {
        out.write("sweep.csv", csv.as_bytes())?;
    }
    if let Some(out) = out {
        out.commit();
    }
    Ok(())
}

fn cmd_serve(ctx: &Ctx) -> anyhow::Result<()> {
    let (data, params) = load_inputs(ctx)?;
    if !params.is_trained() {
        bail!("model is untrained");
    }
    let names = ctx.names()?;
    let mut settings = Settings::from_config(&ctx.cfg);
    settings.method = ctx.method()?;
    if let Some(p) = &ctx.cfg.snapshot_path {
        settings.snapshot = Some(ctx.resolve(p));
    }
    let addr: SocketAddr = format!("{}:{}", ctx.cfg.bind, ctx.cfg.port)
        .parse()
        .map_err(|e| usage(format!("bad bind address {}:{}: {e}", ctx.cfg.bind, ctx.cfg.port)))?;
    let service = Arc::new(Service::new(params, data, &names, settings)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(ucrec_service::serve(service, addr))
}

fn cmd_synth(ctx: &Ctx, users: usize, items: usize) -> anyhow::Result<()> {
    if users == 0 || items == 0 {
        return Err(usage("--users and --items must be positive"));
    }
    let mut out = Outputs::new(ctx.out_dir()?)?;
    let corpus = generate(&SynthConfig {
        n_users: users,
        n_items: items,
        seed: ctx.common.seed.unwrap_or(SynthConfig::default().seed),
        ..SynthConfig::default()
    });
    out.write("ratings.tsv", corpus.ratings_text().as_bytes())?;
    out.write("names.txt", corpus.names_text().as_bytes())?;
    println!("{} interactions, {} users, {} items", corpus.records.len(), users, items);
    out.commit();
    Ok(())
}
