use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use super::output::JsonlWriter;
use super::*;
use crate::bench::{
    instance_record, load_benchmark, prefilter, BenchmarkInstance, BenchmarkKind, LoadError, Schema,
};
use crate::corpus::DocumentStream;
use crate::guessing::{
    memorized_client, prepare, run_prepared, template_hash, Entry, GuessMode, Hint, LexiconTagger,
    ProtocolConfig, SkipStage, SkippedItem, KEYWORD_TEMPLATE, PROMPT_VERSION,
};
use crate::index::{build_index, load_index, save_index, Bm25Params};
use crate::model::{load_profiles, MockKind, ModelClient, ModelProfile, ProfileSet};
use crate::overlap::{detect, DetectOptions, Metric, QueryKind};
use crate::report::{
    emit_report, krippendorff_alpha, read_guess_records, AnnotationSet, ReportFormat, RunHeader,
    RunReport,
};

/// A bad flag value caught after parsing; maps to the usage exit code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(command: Command, jobs: usize) -> Result<()> {
    match command {
        Command::Index(IndexCommand::Build(a)) => index_build(a),
        Command::Index(IndexCommand::Search(a)) => index_search(a),
        Command::Filter(a) => filter(a),
        Command::Overlap(a) => overlap(a, jobs),
        Command::Guess(a) => guess(a, jobs),
        Command::Report(a) => report(a),
        Command::Agree(a) => agree(a),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn path_value(path: &Path) -> Value {
    Value::from(path.display().to_string())
}

fn index_build(a: IndexBuildArgs) -> Result<()> {
    if a.k1.is_nan() || a.k1 < 0.0 || !(0.0..=1.0).contains(&a.b) {
        return Err(usage("--k1 must be >= 0 and --b within [0, 1]"));
    }
    let mut streams = Vec::new();
    for path in &a.corpus {
        let source = a.source.clone().unwrap_or_else(|| stem(path));
        streams.push((path, DocumentStream::open(path, &source)?));
    }
    let index = build_index(
        streams.iter_mut().flat_map(|(_, s)| s),
        Bm25Params { k1: a.k1, b: a.b },
    )?;
    for (path, s) in &streams {
        let st = s.stats();
        log::info!(
            "{}: {} documents, {} malformed, {} empty, {} oversized lines skipped",
            path.display(),
            st.documents,
            st.skipped_malformed,
            st.skipped_empty,
            st.skipped_oversized
        );
    }
    save_index(&index, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    log::info!(
        "indexed {} documents into {}",
        index.doc_count(),
        a.out.display()
    );
    Ok(())
}

fn index_search(a: IndexSearchArgs) -> Result<()> {
    if a.k == 0 {
        return Err(usage("-k must be at least 1"));
    }
    let index = load_index(&a.idx).with_context(|| format!("loading index {}", a.idx.display()))?;
    let hits = index.search(&a.query, a.k)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    for hit in hits {
        serde_json::to_writer(&mut out, &hit)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

struct Loaded {
    name: String,
    instances: Vec<BenchmarkInstance>,
    errors: Vec<LoadError>,
}

fn load(input: &BenchmarkInput) -> Result<Loaded> {
    let name = input.name.clone().unwrap_or_else(|| stem(&input.benchmark));
    let schema = match input.schema {
        SchemaArg::GenericQa => Schema::GenericQa,
        SchemaArg::Multichoice => Schema::Multichoice,
    };
    let loaded = load_benchmark(&input.benchmark, schema, &name)?;
    for e in &loaded.errors {
        log::warn!(
            "{} line {}: {}",
            input.benchmark.display(),
            e.line,
            e.message
        );
    }
    Ok(Loaded {
        name,
        instances: loaded.instances,
        errors: loaded.errors,
    })
}

fn input_config(input: &BenchmarkInput, name: &str) -> BTreeMap<String, Value> {
    let mut c = BTreeMap::new();
    c.insert("benchmark".into(), Value::from(name));
    c.insert("benchmark_path".into(), path_value(&input.benchmark));
    c.insert(
        "schema".into(),
        Value::from(match input.schema {
            SchemaArg::GenericQa => "generic_qa",
            SchemaArg::Multichoice => "multichoice",
        }),
    );
    c
}

fn kind(k: KindArg) -> BenchmarkKind {
    match k {
        KindArg::Truthfulqa => BenchmarkKind::Truthfulqa,
        KindArg::General => BenchmarkKind::General,
    }
}

fn kind_name(k: KindArg) -> &'static str {
    match k {
        KindArg::Truthfulqa => "truthfulqa",
        KindArg::General => "general",
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(usage(format!(
            "--rouge-threshold must be in (0, 1], got {t}"
        )))
    }
}

fn load_error_record(name: &str, e: &LoadError) -> Value {
    json!({"instance_id": format!("{name}:{}", e.line), "line": e.line, "message": e.message})
}

fn filter(a: FilterArgs) -> Result<()> {
    check_threshold(a.rouge_threshold)?;
    let loaded = load(&a.input)?;
    let (kept, decisions) = prefilter(&loaded.instances, kind(a.kind), a.rouge_threshold)?;

    let mut config = input_config(&a.input, &loaded.name);
    config.insert("kind".into(), Value::from(kind_name(a.kind)));
    config.insert("rouge_threshold".into(), Value::from(a.rouge_threshold));
    let mut header = RunHeader::new("filter", config);
    header.n_total = loaded.instances.len() + loaded.errors.len();
    header.n_filtered = decisions.iter().filter(|d| !d.kept).count();

    let mut w = JsonlWriter::create(&a.decisions_out, &header)?;
    for e in &loaded.errors {
        w.record("load_error", &load_error_record(&loaded.name, e))?;
    }
    for d in &decisions {
        w.record("decision", d)?;
    }
    w.finish()?;

    if let Some(path) = &a.kept_out {
        let mut w = JsonlWriter::create(path, &header)?;
        for inst in &kept {
            w.raw(&instance_record(inst))?;
        }
        w.finish()?;
    }
    log::info!(
        "kept {} of {} instances",
        kept.len(),
        loaded.instances.len()
    );
    Ok(())
}

fn profiles(path: Option<&Path>) -> Result<ProfileSet> {
    Ok(match path {
        Some(p) => load_profiles(p)?,
        None => ProfileSet::default(),
    })
}

/// Secret-free description of a profile for config snapshots.
fn profile_value(p: &ModelProfile) -> Value {
    let mut v = json!({
        "name": p.name,
        "temperature": p.temperature,
        "max_retries": p.max_retries,
    });
    if let Some(e) = &p.endpoint {
        v["endpoint"] = Value::from(e.as_str());
        v["model"] = Value::from(p.model.clone().unwrap_or_else(|| p.name.clone()));
    }
    if let Some(k) = p.mock {
        v["mock"] = serde_json::to_value(k).unwrap_or(Value::Null);
    }
    v
}

fn query_kind(q: QueryKindArg) -> QueryKind {
    match q {
        QueryKindArg::QuestionOnly => QueryKind::QuestionOnly,
        QueryKindArg::LabelOnly => QueryKind::LabelOnly,
        QueryKindArg::QuestionLabel => QueryKind::QuestionLabel,
    }
}

fn overlap(a: OverlapArgs, jobs: usize) -> Result<()> {
    if a.k == 0 || a.ngram == 0 {
        return Err(usage("-k and --ngram must be at least 1"));
    }
    let mut metrics = Vec::new();
    for m in &a.metrics {
        let metric: Metric = m.trim().parse().map_err(|e| usage(format!("{e}")))?;
        if !metrics.contains(&metric) {
            metrics.push(metric);
        }
    }
    let set = profiles(a.profiles.as_deref())?;
    let judge_profile = match (&a.judge, metrics.contains(&Metric::GptScore)) {
        (Some(name), _) => Some(set.resolve(name)?),
        (None, true) => return Err(usage("gpt_score needs --judge <profile>")),
        (None, false) => None,
    };
    let judge: Option<Box<dyn ModelClient>> =
        judge_profile.as_ref().map(|p| p.build()).transpose()?;

    let index = load_index(&a.idx).with_context(|| format!("loading index {}", a.idx.display()))?;
    let loaded = load(&a.input)?;

    let mut config = input_config(&a.input, &loaded.name);
    config.insert("index_path".into(), path_value(&a.idx));
    config.insert("k".into(), Value::from(a.k));
    config.insert("ngram".into(), Value::from(a.ngram));
    config.insert(
        "metrics".into(),
        Value::from(metrics.iter().map(|m| m.name()).collect::<Vec<_>>()),
    );
    config.insert(
        "query_kind".into(),
        a.query_kind
            .map(|q| serde_json::to_value(query_kind(q)))
            .transpose()?
            .unwrap_or_else(|| Value::from("default")),
    );
    config.insert("bm25".into(), serde_json::to_value(index.params())?);
    if let Some(p) = &judge_profile {
        config.insert("judge".into(), profile_value(p));
        config.insert("judge_retries".into(), Value::from(a.judge_retries));
    }
    let mut header = RunHeader::new("overlap", config);
    header.n_total = loaded.instances.len() + loaded.errors.len();

    let opts = DetectOptions {
        k: a.k,
        ngram: a.ngram,
        metrics,
        judge: judge.as_deref(),
        judge_retries: a.judge_retries,
        external: Vec::new(),
        query_kind: a.query_kind.map(query_kind),
    };
    let sequential = judge.as_ref().is_some_and(|j| j.order_sensitive());
    let results: Vec<_> = if sequential || jobs == 1 {
        loaded
            .instances
            .iter()
            .map(|i| detect(i, &index, &opts))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| {
            loaded
                .instances
                .par_iter()
                .map(|i| detect(i, &index, &opts))
                .collect()
        })
    };

    let mut w = JsonlWriter::create(&a.out, &header)?;
    for e in &loaded.errors {
        w.record("load_error", &load_error_record(&loaded.name, e))?;
    }
    let mut failed = 0;
    for (inst, r) in loaded.instances.iter().zip(results) {
        match r {
            Ok(report) => w.record("overlap", &report)?,
            Err(e) => {
                failed += 1;
                w.record(
                    "error",
                    &json!({"instance_id": inst.instance_id, "error": e.to_string()}),
                )?
            }
        }
    }
    w.finish()?;
    if failed > 0 {
        log::warn!("{failed} instances could not be scored");
    }
    Ok(())
}

fn build_client(
    p: &ModelProfile,
    prepared: Option<&[Result<crate::guessing::PreparedItem, SkippedItem>]>,
) -> Result<Box<dyn ModelClient>> {
    // a memorized mock without its own memory learns the run's gold answers
    if let (Some(MockKind::Memorized), Some(prepared)) = (p.mock, prepared) {
        if p.mock_data.memory.is_empty() {
            return Ok(memorized_client(prepared));
        }
    }
    Ok(p.build()?)
}

fn guess(a: GuessArgs, jobs: usize) -> Result<()> {
    check_threshold(a.rouge_threshold)?;
    let mode = match a.mode {
        ModeArg::Question => GuessMode::QuestionBased,
        ModeArg::Multichoice => GuessMode::QuestionMultichoice,
    };
    let hint = match a.hint {
        HintArg::None => Hint::None,
        HintArg::Type => Hint::Type,
        HintArg::Category => Hint::Category,
        HintArg::Url => Hint::Url,
    };
    if mode == GuessMode::QuestionMultichoice && hint != Hint::None {
        return Err(usage("--hint applies to --mode question only"));
    }
    let set = profiles(a.profiles.as_deref())?;
    let model_profile = set.resolve(&a.model)?;
    let keyword_profile = a
        .keyword_model
        .as_deref()
        .map(|n| set.resolve(n))
        .transpose()?;
    if keyword_profile.is_some() && mode != GuessMode::QuestionBased {
        return Err(usage("--keyword-model applies to --mode question only"));
    }

    let loaded = load(&a.input)?;
    let (instances, n_filtered) = match a.prefilter {
        Some(k) => {
            let (kept, decisions) = prefilter(&loaded.instances, kind(k), a.rouge_threshold)?;
            let removed = decisions.iter().filter(|d| !d.kept).count();
            (kept, removed)
        }
        None => (loaded.instances.clone(), 0),
    };

    let mut config = input_config(&a.input, &loaded.name);
    config.insert("mode".into(), serde_json::to_value(mode)?);
    config.insert("hint".into(), serde_json::to_value(hint)?);
    config.insert("model".into(), Value::from(a.model.as_str()));
    config.insert("model_profile".into(), profile_value(&model_profile));
    config.insert("seed".into(), Value::from(a.seed));
    config.insert("strict_em".into(), Value::from(a.strict_em));
    config.insert("prompt_version".into(), Value::from(PROMPT_VERSION));
    config.insert(
        "prompt_template_sha256".into(),
        Value::from(template_hash(mode)),
    );
    config.insert(
        "prefilter".into(),
        match a.prefilter {
            Some(k) => json!({"kind": kind_name(k), "rouge_threshold": a.rouge_threshold}),
            None => Value::Null,
        },
    );
    if let Some(p) = &keyword_profile {
        config.insert("keyword_model".into(), profile_value(p));
        config.insert(
            "keyword_template_sha256".into(),
            Value::from(hex::encode(<sha2::Sha256 as sha2::Digest>::digest(
                KEYWORD_TEMPLATE.as_bytes(),
            ))),
        );
    }

    let cfg = ProtocolConfig {
        mode,
        hint,
        seed: a.seed,
        strict_em: a.strict_em,
        jobs,
        ..ProtocolConfig::default()
    };
    let keyword_client = keyword_profile
        .as_ref()
        .map(|p| build_client(p, None))
        .transpose()?;
    let prepared = prepare(&instances, &cfg, &LexiconTagger, keyword_client.as_deref());
    let model = build_client(&model_profile, Some(&prepared))?;
    let outcome = run_prepared(&prepared, &cfg, model.as_ref());

    let mut header = RunHeader::new("guess", config);
    header.n_total = loaded.instances.len() + loaded.errors.len();
    header.n_filtered = n_filtered;
    let mut w = JsonlWriter::create(&a.out, &header)?;
    for e in &loaded.errors {
        w.record(
            "skipped",
            &SkippedItem {
                instance_id: format!("{}:{}", loaded.name, e.line),
                stage: SkipStage::Load,
                reason: e.message.clone(),
            },
        )?;
    }
    for entry in &outcome.entries {
        match entry {
            Entry::Guess(g) => w.record("guess", g)?,
            Entry::Skipped(s) => w.record("skipped", s)?,
        }
    }
    w.finish()?;

    let scored = outcome.results().count();
    log::info!(
        "scored {scored}, skipped {}, em rate {}",
        outcome.skipped().count(),
        outcome
            .em_rate()
            .map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    if let Some(why) = outcome.aborted {
        bail!("run aborted after {scored} scored instances: {why}");
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let (header, entries) = read_guess_records(BufReader::new(file))?;
    let run = RunReport::build(&header, &entries);
    let format = match a.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Markdown => ReportFormat::Markdown,
        FormatArg::Csv => ReportFormat::Csv,
    };
    std::fs::write(&a.out, emit_report(&run, format))
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn agree(a: AgreeArgs) -> Result<()> {
    let file = File::open(&a.annotations)
        .with_context(|| format!("opening {}", a.annotations.display()))?;
    let set = AnnotationSet::from_csv(BufReader::new(file))?;
    let alpha = krippendorff_alpha(&set)?;
    let items: std::collections::BTreeSet<&str> =
        set.items().iter().map(|x| x.item_id.as_str()).collect();
    let value = json!({
        "annotations": set.items().len(),
        "items": items.len(),
        "krippendorff_alpha": crate::report::quantize(alpha),
        "metric": "nominal",
    });
    let text = crate::report::canonical_json(&value);
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
