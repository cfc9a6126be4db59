use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use irn::checkpoint::TrainedModel;
use irn::dataset::{
    generate_conjunctive, generate_path_dataset, read_jsonl, synth, tokenize, write_jsonl,
    QaInstance, Symbols, TemplateSet,
};
use irn::evaluator::{
    dataset_fingerprint, kb_fingerprint, mean, override_evaluation, predict_all, run_experiment,
    sha256_hex, EvalReport, Experiment,
};
use irn::inference::{
    answer_conjunctive, answer_question, export_gate_heatmap, relation_neighbors, Halting,
    Prediction, PredictionReport,
};
use irn::kb::KnowledgeBase;
use irn::model::{gradcheck_suite, ModelInput, TrainMode, GRADCHECK_TOL};
use irn::numerics::Prng;
use irn::trainer::TrainConfig;
use irn::IrnError;
use serde_json::json;

use crate::args::*;
use crate::{EXIT_CHECK, EXIT_DATA, EXIT_USAGE};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(IrnError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<IrnError> for CliError {
    fn from(e: IrnError) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| {
        CliError::Data(IrnError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| {
        CliError::Data(IrnError::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    Ok(sha256_hex(&bytes))
}

fn print_manifest(value: serde_json::Value) {
    println!("manifest {value}");
}

pub fn run(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::SynthKb(a) => synth_kb(a),
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Answer(a) => answer(a),
        Command::Trace(a) => trace(a),
        Command::OverrideEval(a) => override_eval(a),
        Command::RelWords(a) => rel_words(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn synth_kb(a: SynthKbArgs) -> CliResult<u8> {
    if a.people == 0 {
        return Err(usage("--people must be positive"));
    }
    let kb = synth::synthesize_kb(&synth::SynthConfig {
        target_people: a.people,
        seed: a.seed,
    })?;
    kb.write_tsv(&a.out)?;
    println!(
        "wrote {} triples over {} entities and {} relations to {}",
        kb.num_triples(),
        kb.num_entities(),
        kb.num_relations(),
        a.out.display()
    );
    print_manifest(json!({
        "command": "synth-kb",
        "seed": a.seed,
        "people": a.people,
        "kb_sha256": kb_fingerprint(&kb),
    }));
    Ok(0)
}

enum Shape {
    Path(usize),
    Conjunctive,
}

fn gen_data(a: GenDataArgs) -> CliResult<u8> {
    let shape = match a.hops.as_str() {
        "2" => Shape::Path(2),
        "3" => Shape::Path(3),
        "conj" => Shape::Conjunctive,
        other => return Err(usage(format!("--hops must be 2, 3 or conj, got `{other}`"))),
    };
    if a.max == Some(0) || a.per_path == 0 {
        return Err(usage("--max and --per-path must be positive"));
    }
    let templates = match &a.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::builtin(),
    };
    let kb = KnowledgeBase::load_triples(&a.kb)?;
    let mut rng = Prng::stream(a.seed, "generator");
    let (kb, data) = match shape {
        Shape::Path(h) => {
            let max = a.max.unwrap_or(if h == 2 { 1908 } else { 5198 });
            let data = generate_path_dataset(&kb, &templates, h, max, a.per_path, &mut rng)?;
            (kb, data)
        }
        Shape::Conjunctive => {
            let closed = kb.add_inverse_relations()?;
            let data = generate_conjunctive(&closed, &templates, &mut rng, a.max.unwrap_or(1000))?;
            let kb_out = a
                .kb_out
                .clone()
                .unwrap_or_else(|| a.out.with_extension("kb.tsv"));
            closed.write_tsv(&kb_out)?;
            println!("wrote inverse-closed KB to {}", kb_out.display());
            (closed, data)
        }
    };
    for inst in &data {
        inst.validate(&kb)?;
    }
    write_jsonl(&a.out, &data, &kb)?;
    println!("wrote {} questions to {}", data.len(), a.out.display());
    print_manifest(json!({
        "command": "gen-data",
        "seed": a.seed,
        "hops": a.hops,
        "per_path": a.per_path,
        "kb_sha256": kb_fingerprint(&kb),
        "dataset_sha256": dataset_fingerprint(&data, &kb),
    }));
    Ok(0)
}

fn build_config(flags: &ConfigFlags) -> CliResult<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let bad = |e: IrnError| usage(e.to_string());
    if let Some(m) = &flags.mode {
        cfg.mode = m.parse().map_err(bad)?;
    }
    let pairs: [(&str, Option<String>); 7] = [
        ("seed", flags.seed.map(|v| v.to_string())),
        ("dim", flags.dim.map(|v| v.to_string())),
        ("lambda", flags.lambda.map(|v| v.to_string())),
        ("lr", flags.lr.map(|v| v.to_string())),
        ("batch", flags.batch.map(|v| v.to_string())),
        ("max_rounds", flags.max_rounds.map(|v| v.to_string())),
        ("patience", flags.patience.map(|v| v.to_string())),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v).map_err(bad)?;
        }
    }
    for kv in &flags.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v).map_err(bad)?;
    }
    cfg.validate().map_err(bad)?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> CliResult<u8> {
    let experiment: Experiment = a
        .experiment
        .parse()
        .map_err(|e: IrnError| usage(e.to_string()))?;
    let cfg = build_config(&a.cfg)?;
    let kb = KnowledgeBase::load_triples(&a.kb)?;
    let data = read_jsonl(&a.data, &kb)?;
    let res = run_experiment(experiment, &kb, &data, &cfg)?;
    res.model.save(&a.out)?;
    if let Some(p) = &a.history {
        write_file(p, &res.history.to_csv())?;
    }
    if let Some(p) = &a.report {
        write_file(
            p,
            &serde_json::to_string_pretty(&res.report).map_err(IrnError::from)?,
        )?;
    }
    if let Some(p) = &a.test_out {
        write_jsonl(p, &res.test, &kb)?;
    }
    println!(
        "trained {} rounds (best {}), test accuracy {:.4} on {} questions",
        res.history.rounds.len(),
        res.history.best_round,
        res.report.accuracy,
        res.report.count
    );
    for (name, sub) in &res.report.subsets {
        println!("  {name}: {:.4} on {}", sub.accuracy, sub.count);
    }
    print_manifest(serde_json::to_value(&res.manifest).map_err(IrnError::from)?);
    Ok(0)
}

fn config_from_provenance(model: &TrainedModel) -> CliResult<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for (k, v) in &model.provenance {
        if let Some(key) = k.strip_prefix("config.") {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn eval(a: EvalArgs) -> CliResult<u8> {
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    if a.repeats > 1 && (a.kb.is_none() || a.train_data.is_none()) {
        return Err(usage("--repeats > 1 needs --kb and --train-data"));
    }
    let model = TrainedModel::load(&a.model)?;
    let data = read_jsonl(&a.data, &model)?;
    let kb = a.kb.as_ref().map(KnowledgeBase::load_triples).transpose()?;
    let cfg = config_from_provenance(&model)?;
    let preds = predict_all(&model.params, &model.vocab, &data, model.mode, cfg.hop_cap)?;
    let mut report = EvalReport::build(&preds, &data, a.per_hop, kb.as_ref())?;
    report.metadata = BTreeMap::from([
        ("model_sha256".into(), file_digest(&a.model)?),
        ("dataset_sha256".into(), dataset_fingerprint(&data, &model)),
        ("mode".into(), model.mode.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ]);
    if a.repeats > 1 {
        let kb = kb.as_ref().expect("checked above");
        let train_data = read_jsonl(a.train_data.as_ref().expect("checked above"), kb)?;
        let experiment: Experiment = model
            .provenance
            .get("experiment")
            .map_or(Ok(Experiment::Standard), |s| s.parse())?;
        for i in 0..a.repeats {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(i as u64);
            let res = run_experiment(experiment, kb, &train_data, &c)?;
            println!(
                "repeat {} (seed {}): {:.4}",
                i + 1,
                c.seed,
                res.report.accuracy
            );
            report.repeats.push(res.report.accuracy);
        }
        report
            .metadata
            .insert("repeat_mean".into(), mean(&report.repeats).to_string());
    }
    let text = serde_json::to_string_pretty(&report).map_err(IrnError::from)?;
    write_file(&a.report, &text)?;
    write_file(&a.report.with_extension("csv"), &report.to_csv())?;
    if let Some(p) = &a.predictions {
        write_file(p, &serde_json::to_string(&preds).map_err(IrnError::from)?)?;
    }
    println!(
        "accuracy {:.4} on {} questions",
        report.accuracy, report.count
    );
    for (kind, t) in &report.per_hop {
        let cells: Vec<String> = t
            .columns
            .iter()
            .zip(&t.strict)
            .map(|(c, v)| format!("{c}={v:.3}"))
            .collect();
        println!("  {kind}: {}", cells.join(" "));
    }
    if !report.repeats.is_empty() {
        println!(
            "mean over {} repeats: {:.4}",
            report.repeats.len(),
            mean(&report.repeats)
        );
    }
    print_manifest(json!({
        "command": "eval",
        "model_sha256": report.metadata["model_sha256"],
        "dataset_sha256": report.metadata["dataset_sha256"],
        "seed": cfg.seed,
        "repeats": a.repeats,
    }));
    Ok(0)
}

struct Asked {
    model: TrainedModel,
    tokens: Vec<usize>,
    subjects: Vec<usize>,
    halting: Halting,
}

fn prepare(q: &QuestionArgs) -> CliResult<Asked> {
    if q.hop_cap == 0 || q.hops == Some(0) {
        return Err(usage("--hop-cap and --hops must be positive"));
    }
    let model = TrainedModel::load(&q.model)?;
    let words = tokenize(&q.question);
    if words.is_empty() {
        return Err(usage("--question is empty"));
    }
    for w in &words {
        if !model.vocab.contains(w) {
            eprintln!("warning: unknown word `{w}` mapped to <unk>");
        }
    }
    let subjects = q
        .subjects
        .iter()
        .map(|s| model.entity_id(s))
        .collect::<irn::Result<Vec<_>>>()?;
    let halting = match (q.hops, model.mode) {
        (Some(n), _) => Halting::FixedHops(n),
        (None, TrainMode::Irn) => Halting::Terminal { hop_cap: q.hop_cap },
        (None, TrainMode::IrnWeak) => {
            return Err(usage(
                "answer-only models do not learn to stop; pass --hops",
            ))
        }
    };
    let tokens = model.vocab.encode(&words);
    Ok(Asked {
        model,
        tokens,
        subjects,
        halting,
    })
}

fn format_path(model: &TrainedModel, subject: usize, pred: &Prediction) -> String {
    let mut s = model.entity_name(subject).to_string();
    for step in &pred.path {
        s.push_str(&format!(
            " --{}--> {}",
            model.relation_name(step.relation),
            model.entity_name(step.entity)
        ));
    }
    s
}

fn answer(a: AnswerArgs) -> CliResult<u8> {
    let asked = prepare(&a.q)?;
    let m = &asked.model;
    if asked.subjects.len() >= 2 {
        let c = answer_conjunctive(&m.params, &asked.tokens, &asked.subjects, asked.halting)?;
        if a.json {
            let branches: Vec<_> = c
                .branches
                .iter()
                .map(|b| PredictionReport::new(b, m))
                .collect();
            println!(
                "{}",
                json!({"answer": m.entity_name(c.answer), "branches": branches})
            );
        } else {
            println!("answer: {}", m.entity_name(c.answer));
            for (s, b) in asked.subjects.iter().zip(&c.branches) {
                println!("  {}", format_path(m, *s, b));
            }
        }
    } else {
        let input = ModelInput {
            tokens: asked.tokens.clone(),
            subject: asked.subjects[0],
        };
        let p = answer_question(&m.params, &input, asked.halting)?;
        if a.json {
            println!(
                "{}",
                serde_json::to_string(&PredictionReport::new(&p, m)).map_err(IrnError::from)?
            );
        } else {
            println!("answer: {}", m.entity_name(p.answer));
            println!("path: {}", format_path(m, asked.subjects[0], &p));
            if p.degenerate {
                println!("note: Terminal predicted at the first hop; answer read from the topic entity state");
            }
        }
    }
    Ok(0)
}

fn trace(a: TraceArgs) -> CliResult<u8> {
    let asked = prepare(&a.q)?;
    let m = &asked.model;
    if asked.subjects.len() != 1 {
        return Err(usage("trace takes exactly one --subject"));
    }
    let input = ModelInput {
        tokens: asked.tokens.clone(),
        subject: asked.subjects[0],
    };
    let p = answer_question(&m.params, &input, asked.halting)?;
    println!(
        "{:<4} {:<24} {:>8} {:<32} {:>8}",
        "hop", "relation", "p(rel)", "entity", "p(ent)"
    );
    for (h, rec) in p.trace.hops.iter().enumerate() {
        let (ent, pe) = match &rec.entity {
            Some(e) => (
                m.entity_name(e.entity).to_string(),
                format!("{:.4}", e.probs[e.entity]),
            ),
            None => ("-".to_string(), "-".to_string()),
        };
        println!(
            "{:<4} {:<24} {:>8.4} {:<32} {:>8}",
            h + 1,
            m.relation_name(rec.relation),
            rec.relation_probs[rec.relation],
            ent,
            pe
        );
    }
    println!("answer: {} (stop: {:?})", m.entity_name(p.answer), p.stop);
    if let Some(path) = &a.heatmap {
        export_gate_heatmap(&p.trace, &m.relation_names_with_terminal(), path)?;
        println!("wrote relation heatmap to {}", path.display());
    }
    if let Some(path) = &a.json {
        let report = PredictionReport::new(&p, m);
        write_file(
            path,
            &serde_json::to_string_pretty(&report).map_err(IrnError::from)?,
        )?;
    }
    print_manifest(json!({
        "command": "trace",
        "model_sha256": file_digest(&a.q.model)?,
        "question": a.q.question,
        "subject": a.q.subjects[0],
    }));
    Ok(0)
}

fn override_eval(a: OverrideEvalArgs) -> CliResult<u8> {
    let model = TrainedModel::load(&a.model)?;
    let data: Vec<QaInstance> = read_jsonl(&a.data, &model)?;
    let cfg = config_from_provenance(&model)?;
    let r = override_evaluation(&model.params, &model.vocab, &data, model.mode, cfg.hop_cap)?;
    println!(
        "baseline {:.4}  forced {:.4}  uplift {:+.4} on {} questions",
        r.baseline, r.forced, r.uplift, r.count
    );
    if let Some(p) = &a.report {
        write_file(
            p,
            &serde_json::to_string_pretty(&r).map_err(IrnError::from)?,
        )?;
    }
    print_manifest(json!({
        "command": "override-eval",
        "model_sha256": file_digest(&a.model)?,
        "dataset_sha256": dataset_fingerprint(&data, &model),
    }));
    Ok(0)
}

fn rel_words(a: RelWordsArgs) -> CliResult<u8> {
    let model = TrainedModel::load(&a.model)?;
    let rel = model.relation_id(&a.relation)?;
    let list = relation_neighbors(&model.params, &model.vocab, rel, a.k)?;
    let words: Vec<&str> = list.iter().map(|(w, _)| w.as_str()).collect();
    println!("{}: {}", a.relation, words.join(", "));
    for (w, c) in &list {
        println!("  {w:<20} {c:.4}");
    }
    Ok(0)
}

fn gradcheck(a: GradcheckArgs) -> CliResult<u8> {
    if a.cases == 0 {
        return Err(usage("--cases must be positive"));
    }
    let outcomes = gradcheck_suite(a.seed, a.cases)?;
    let mut failed = 0;
    for (i, o) in outcomes.iter().enumerate() {
        let ok = o.passed(GRADCHECK_TOL);
        failed += usize::from(!ok);
        println!(
            "case {:>2}: max rel error {:.3e} ({} [{}]) over {} entries {}",
            i + 1,
            o.max_rel_error,
            o.worst_tensor,
            o.worst_index,
            o.entries,
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} cases within {:e}",
        outcomes.len() - failed,
        outcomes.len(),
        GRADCHECK_TOL
    );
    Ok(if failed == 0 { 0 } else { EXIT_CHECK })
}
