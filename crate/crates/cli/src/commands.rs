use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use limerick::continuity::{EmbeddingTable, OntologyGraph};
use limerick::corpus::{
    encode, load_corpus, read_encoded, split, tokenize_line, Direction, Poem, Vocabulary,
};
use limerick::generation::{AttemptRecord, AttemptStatus, GenerationError, Mode, Models};
use limerick::lm::{
    select_by_perplexity, ExternalLm, LanguageModel, LmError, NGramConfig, NGramModel,
};
use limerick::pipeline::ttr::threshold_from;
use limerick::pipeline::{
    filter_and_rank, generate_until, mean_std, ttr, ttr_threshold, BatchConfig, CachedClassifier,
    Classification, ClassifierClient, HttpClassifier, HttpClassifierConfig, Lexicon, PipelineError,
    PoemScorecard, Scorer, StubClassifier, TtrThreshold, SCORECARD_SCHEMA,
};
use limerick::rhyme::PronunciationDictionary;
use log::{info, warn};
use serde::Serialize;

use crate::config::{ClassifierKind, RunConfig};
use crate::io::{
    is_jsonl, read_jsonl, require, write_json, write_jsonl, Tagged, ATTEMPT_SCHEMA,
    REJECTION_SCHEMA,
};
use crate::{
    external, usage, CliError, FilterArgs, GenerateArgs, PrepArgs, RankArgs, ReportArgs, ScoreArgs,
    TrainArgs,
};

type CmdResult = Result<(), CliError>;

fn corpus_text(poems: &[Poem]) -> String {
    let mut out = poems
        .iter()
        .map(Poem::text)
        .collect::<Vec<_>>()
        .join("\n\n");
    out.push('\n');
    out
}

fn load_poems(path: &Path) -> Result<Vec<Poem>, CliError> {
    let (poems, skipped) =
        load_corpus(path).with_context(|| format!("loading {}", path.display()))?;
    for s in &skipped {
        warn!(
            "{}:{}: skipped block: {}",
            path.display(),
            s.first_line,
            s.reason
        );
    }
    Ok(poems)
}

fn load_vocab(data: &Path) -> Result<Vocabulary, CliError> {
    let path = data.join("vocab.txt");
    require(&path, "vocabulary")?;
    Ok(Vocabulary::load(&path).with_context(|| format!("loading {}", path.display()))?)
}

fn lm_error(e: LmError) -> CliError {
    match e {
        LmError::Connect { .. } | LmError::Protocol(_) => external(e),
        LmError::Config(_) => usage(e),
        other => other.into(),
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Generation(GenerationError::Lm(lm)) => lm_error(lm),
        PipelineError::Generation(GenerationError::Config(m)) | PipelineError::Config(m) => {
            usage(m)
        }
        other => other.into(),
    }
}

#[derive(Serialize)]
struct PrepStats {
    schema: &'static str,
    poems: usize,
    train: usize,
    validation: usize,
    skipped_blocks: usize,
    vocab_size: usize,
    vocab_hash: String,
}

pub fn prep(mut cfg: RunConfig, a: PrepArgs) -> CmdResult {
    if a.corpus.is_some() {
        cfg.paths.corpus = a.corpus;
    }
    if let Some(d) = a.out_dir {
        cfg.paths.data_dir = d;
    }
    if let Some(f) = a.val_fraction {
        cfg.prep.val_fraction = f;
    }
    if let Some(s) = a.split_seed {
        cfg.prep.split_seed = s;
    }
    let corpus = cfg
        .paths
        .corpus
        .clone()
        .ok_or_else(|| usage("no corpus given (--corpus or paths.corpus)"))?;
    let f = cfg.prep.val_fraction;
    if !(f > 0.0 && f < 0.5) {
        return Err(usage(format!("val_fraction must lie in (0, 0.5), got {f}")));
    }
    require(&corpus, "corpus")?;

    let (poems, skipped) =
        load_corpus(&corpus).with_context(|| format!("loading {}", corpus.display()))?;
    for s in &skipped {
        warn!(
            "{}:{}: skipped block: {}",
            corpus.display(),
            s.first_line,
            s.reason
        );
    }
    let (train, val) = split(&poems, f, cfg.prep.split_seed)?;
    if train.is_empty() || val.is_empty() {
        return Err(anyhow!(
            "{} poems are too few for a train/validation split",
            poems.len()
        )
        .into());
    }
    let vocab = Vocabulary::build(&train);
    let hash = vocab.hash();

    let out = cfg.paths.data_dir.clone();
    cfg.echo(&out, "prep")?;
    vocab.save(&out.join("vocab.txt"))?;
    for direction in [Direction::Forward, Direction::Reverse] {
        for (name, set) in [("train", &train), ("val", &val)] {
            let seqs: Vec<_> = set.iter().map(|p| encode(p, direction, &vocab)).collect();
            let path = out.join(format!("{direction}.{name}.enc"));
            let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
            limerick::corpus::write_encoded(&mut w, direction, &hash, &seqs)?;
            std::io::Write::flush(&mut w)?;
        }
    }
    std::fs::write(out.join("train.txt"), corpus_text(&train))?;
    std::fs::write(out.join("val.txt"), corpus_text(&val))?;
    let stats = PrepStats {
        schema: "limerick.prep-stats/1",
        poems: poems.len(),
        train: train.len(),
        validation: val.len(),
        skipped_blocks: skipped.len(),
        vocab_size: vocab.len(),
        vocab_hash: hash,
    };
    write_json(&out.join("stats.json"), &stats)?;
    println!(
        "{} poems ({} train, {} validation), {} skipped blocks, vocabulary of {}",
        stats.poems, stats.train, stats.validation, stats.skipped_blocks, stats.vocab_size
    );
    Ok(())
}

pub fn train(mut cfg: RunConfig, a: TrainArgs) -> CmdResult {
    if let Some(d) = a.data {
        cfg.paths.data_dir = d;
    }
    if let Some(d) = a.out_dir {
        cfg.paths.model_dir = d;
    }
    if !a.order.is_empty() {
        cfg.train.orders = a.order;
    }
    if !a.discount.is_empty() {
        cfg.train.discounts = a.discount;
    }
    if cfg.train.orders.is_empty() || cfg.train.discounts.is_empty() {
        return Err(usage("the order and discount grids must not be empty"));
    }
    let data = &cfg.paths.data_dir;
    let dir = a.direction;
    let train_file = a
        .train_file
        .unwrap_or_else(|| data.join(format!("{dir}.train.enc")));
    let val_file = a
        .val_file
        .unwrap_or_else(|| data.join(format!("{dir}.val.enc")));
    require(&train_file, "training sequences")?;
    require(&val_file, "validation sequences")?;
    let vocab = load_vocab(data)?;

    let mut sets = Vec::new();
    for path in [&train_file, &val_file] {
        let file = read_encoded(path)?;
        if file.direction != dir {
            return Err(anyhow!(
                "direction mismatch: {} is {}-encoded but --direction is {dir}",
                path.display(),
                file.direction
            )
            .into());
        }
        if file.vocab_hash != vocab.hash() {
            return Err(
                anyhow!("{} was encoded with a different vocabulary", path.display()).into(),
            );
        }
        sets.push(file.sequences);
    }
    let grid: Vec<NGramConfig> = cfg
        .train
        .orders
        .iter()
        .flat_map(|&order| {
            cfg.train
                .discounts
                .iter()
                .map(move |&discount| (order, discount))
        })
        .map(|(order, discount)| NGramConfig {
            order,
            discount,
            smoothing: cfg.train.smoothing,
            line_memory: cfg.train.line_memory,
        })
        .collect();
    let (model, rows) =
        select_by_perplexity(&sets[0], &sets[1], &vocab, &grid).map_err(lm_error)?;

    let mut table = String::from("order\tdiscount\tsmoothing\tval_perplexity\tselected\n");
    for r in &rows {
        let chosen = &r.config == model.config();
        let smoothing = serde_json::to_value(r.config.smoothing)?;
        writeln!(
            table,
            "{}\t{}\t{}\t{:.4}\t{}",
            r.config.order,
            r.config.discount,
            smoothing.as_str().unwrap_or("?"),
            r.perplexity,
            if chosen { "*" } else { "" }
        )
        .expect("writing to a String");
    }
    print!("{table}");
    println!("uniform baseline perplexity: {}", vocab.len());

    let out = cfg.paths.model_dir.clone();
    cfg.echo(&out, &format!("train-{dir}"))?;
    std::fs::write(out.join(format!("{dir}.selection.tsv")), &table)?;
    let path = out.join(format!("{dir}.ngram"));
    model.save(&path).map_err(lm_error)?;
    println!("saved {}", path.display());
    Ok(())
}

fn load_model(
    direction: Direction,
    endpoint: Option<&str>,
    model_dir: &Path,
    vocab: &Vocabulary,
) -> Result<Arc<dyn LanguageModel>, CliError> {
    if let Some(ep) = endpoint {
        info!("connecting to {direction} model at {ep}");
        return Ok(Arc::new(
            ExternalLm::connect(ep, direction, vocab).map_err(lm_error)?,
        ));
    }
    let path = model_dir.join(format!("{direction}.ngram"));
    require(&path, &format!("{direction} model"))?;
    let model = NGramModel::load(&path).map_err(lm_error)?;
    if model.direction() != direction {
        return Err(anyhow!("{} holds a {} model", path.display(), model.direction()).into());
    }
    if model.vocab_hash() != vocab.hash() {
        return Err(anyhow!("{} was trained on a different vocabulary", path.display()).into());
    }
    Ok(Arc::new(model))
}

#[derive(Serialize)]
struct GenerateSummary {
    schema: &'static str,
    mode: Mode,
    target: usize,
    attempts: usize,
    parsed: usize,
    failures: BTreeMap<String, usize>,
}

pub fn generate(mut cfg: RunConfig, a: GenerateArgs) -> CmdResult {
    let g = &mut cfg.generate;
    if let Some(m) = a.mode {
        g.mode = m;
    }
    if let Some(n) = a.n {
        g.n = n;
    }
    if a.seed_line.is_some() {
        g.seed_line = a.seed_line;
    }
    if a.forward_endpoint.is_some() {
        g.forward_endpoint = a.forward_endpoint;
    }
    if a.reverse_endpoint.is_some() {
        g.reverse_endpoint = a.reverse_endpoint;
    }
    let s = &mut cfg.sampler;
    if let Some(x) = a.rng_seed {
        s.rng_seed = x;
    }
    if let Some(x) = a.temperature {
        s.temperature = x;
    }
    if let Some(k) = a.top_k {
        s.top_k = (k > 0).then_some(k);
    }
    if let Some(x) = a.max_tokens {
        s.max_tokens = x;
    }
    if let Some(b) = a.budget {
        cfg.filter.retry_budget = b;
    }
    if let Some(d) = a.data {
        cfg.paths.data_dir = d;
    }
    if let Some(d) = a.models {
        cfg.paths.model_dir = d;
    }
    if let Some(d) = a.out_dir {
        cfg.paths.output_dir = d;
    }
    cfg.sampler.validate().map_err(usage)?;
    let g = &cfg.generate;
    if g.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let seed_line = match (&g.seed_line, g.mode) {
        (None, _) => None,
        (Some(line), Mode::Reverse) => {
            let tokens = tokenize_line(line);
            if tokens.is_empty() {
                return Err(usage("--seed-line has no tokens"));
            }
            Some(tokens)
        }
        (Some(_), mode) => {
            return Err(usage(format!(
                "--seed-line only applies to reverse mode, not {mode}"
            )))
        }
    };

    let vocab = load_vocab(&cfg.paths.data_dir)?;
    let mut models = Models::default();
    if matches!(g.mode, Mode::Forward | Mode::TwoStage) {
        let ep = g.forward_endpoint.as_deref();
        models.forward = Some(load_model(
            Direction::Forward,
            ep,
            &cfg.paths.model_dir,
            &vocab,
        )?);
    }
    if matches!(g.mode, Mode::Reverse | Mode::TwoStage) {
        let ep = g.reverse_endpoint.as_deref();
        models.reverse = Some(load_model(
            Direction::Reverse,
            ep,
            &cfg.paths.model_dir,
            &vocab,
        )?);
    }
    if let Some(line) = &seed_line {
        let unknown: Vec<&str> = line
            .iter()
            .filter(|t| vocab.get(t).is_none())
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(usage(format!(
                "seed line has tokens outside the vocabulary: {}",
                unknown.join(", ")
            )));
        }
    }

    let batch = BatchConfig {
        mode: g.mode,
        seed_line,
        sampler: cfg.sampler.clone(),
        filter: cfg.filter.clone(),
        chunk: g.chunk,
    };
    let budget = cfg.filter.retry_budget;
    let (attempts, parsed) =
        generate_until(&models, &vocab, &batch, g.n, budget).map_err(pipeline_error)?;

    let out = cfg.paths.output_dir.clone();
    cfg.echo(&out, "generate")?;
    write_jsonl(
        &out.join("attempts.jsonl"),
        attempts.iter().map(|r| Tagged::new(ATTEMPT_SCHEMA, r)),
    )?;
    let mut failures = BTreeMap::new();
    for f in attempts.iter().filter_map(|r| r.failure) {
        *failures.entry(f.reason.to_string()).or_default() += 1;
    }
    let summary = GenerateSummary {
        schema: "limerick.generate-summary/1",
        mode: cfg.generate.mode,
        target: cfg.generate.n,
        attempts: attempts.len(),
        parsed,
        failures,
    };
    write_json(&out.join("generate.json"), &summary)?;
    println!("{} attempts, {} parsed", summary.attempts, summary.parsed);
    for (reason, n) in &summary.failures {
        println!("  failed ({reason}): {n}");
    }
    if parsed < summary.target {
        return Err(anyhow!(
            "retry budget of {budget} attempts exhausted with {parsed} of {} poems parsed; partial records written",
            summary.target
        )
        .into());
    }
    Ok(())
}

fn read_attempts(path: &Path) -> Result<Vec<AttemptRecord>, CliError> {
    let tagged: Vec<Tagged<AttemptRecord>> = read_jsonl(path, Some(ATTEMPT_SCHEMA))?;
    Ok(tagged.into_iter().map(|t| t.record).collect())
}

fn build_classifier(cfg: &RunConfig) -> Result<Option<Box<dyn ClassifierClient>>, CliError> {
    let c = &cfg.score.classifier;
    Ok(match c.kind {
        ClassifierKind::None => None,
        ClassifierKind::Stub => {
            let path = c
                .fixture
                .as_ref()
                .ok_or_else(|| usage("the stub classifier needs a fixture"))?;
            require(path, "classifier fixture")?;
            let stub = StubClassifier::load(path).map_err(|e| anyhow!("{e}"))?;
            Some(Box::new(CachedClassifier::new(stub)))
        }
        ClassifierKind::Http => {
            let endpoint = c
                .endpoint
                .clone()
                .or_else(|| std::env::var("LIMERICK_CLASSIFIER_URL").ok())
                .ok_or_else(|| usage("no classifier endpoint (score.classifier.endpoint or LIMERICK_CLASSIFIER_URL)"))?;
            let http = HttpClassifier::new(HttpClassifierConfig {
                endpoint,
                token: std::env::var("LIMERICK_CLASSIFIER_TOKEN").ok(),
                max_requests_per_sec: c.max_requests_per_sec,
                timeout_secs: c.timeout_secs,
                retries: c.retries,
                backoff_ms: c.backoff_ms,
            });
            Some(Box::new(CachedClassifier::new(http)))
        }
    })
}

pub fn score(mut cfg: RunConfig, a: ScoreArgs) -> CmdResult {
    let p = &mut cfg.paths;
    for (flag, slot) in [
        (a.dictionary, &mut p.dictionary),
        (a.embeddings, &mut p.embeddings),
        (a.ontology, &mut p.ontology),
        (a.out_dir, &mut p.output_dir),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let explicit_data = a.data.is_some();
    if let Some(d) = a.data {
        cfg.paths.data_dir = d;
    }
    let c = &mut cfg.score.classifier;
    if let Some(k) = a.classifier {
        c.kind = k;
    }
    if a.stub_fixture.is_some() {
        c.fixture = a.stub_fixture;
    }
    if a.ttr_include_punct {
        cfg.score.ttr_include_punct = true;
    }
    if a.strict_self_rhyme {
        cfg.score.rhyme.strict_self_rhyme = true;
    }
    if a.grapheme_fallback {
        cfg.score.rhyme.grapheme_fallback = true;
    }
    require(&a.input, "input")?;
    require(&cfg.paths.dictionary, "pronunciation dictionary")?;
    require(&cfg.paths.embeddings, "embeddings")?;
    require(&cfg.paths.ontology, "ontology directory")?;
    let vocab_path = cfg.paths.data_dir.join("vocab.txt");
    if explicit_data {
        require(&vocab_path, "vocabulary")?;
    }
    let classifier = build_classifier(&cfg)?;

    let poems: Vec<Poem> = if is_jsonl(&a.input)? {
        read_attempts(&a.input)?
            .iter()
            .filter_map(AttemptRecord::poem)
            .collect()
    } else {
        load_poems(&a.input)?
    };
    let dict = PronunciationDictionary::load(&cfg.paths.dictionary)
        .with_context(|| format!("loading {}", cfg.paths.dictionary.display()))?;
    let embeddings = EmbeddingTable::load(&cfg.paths.embeddings)
        .with_context(|| format!("loading {}", cfg.paths.embeddings.display()))?;
    let ontology = OntologyGraph::load(&cfg.paths.ontology)
        .with_context(|| format!("loading {}", cfg.paths.ontology.display()))?;
    let with_dict = cfg.score.lexicon_includes_dictionary.then_some(&dict);
    let lexicon = if vocab_path.is_file() {
        Lexicon::from_resources(&Vocabulary::load(&vocab_path)?, with_dict)
    } else {
        warn!(
            "no vocabulary at {}; the lexicon is the dictionary alone",
            vocab_path.display()
        );
        Lexicon::new(dict.words())
    };

    let scorer = Scorer {
        lexicon: &lexicon,
        dict: &dict,
        rhyme: cfg.score.rhyme,
        embeddings: &embeddings,
        ontology: &ontology,
        continuity: cfg.score.continuity,
        classifier: classifier.as_deref(),
        ttr_include_punct: cfg.score.ttr_include_punct,
    };
    let cards = scorer.score_all(&poems);

    let out = cfg.paths.output_dir.clone();
    cfg.echo(&out, "score")?;
    write_jsonl(&out.join("scorecards.jsonl"), &cards)?;
    let n = cards.len().max(1) as f64;
    println!(
        "{} poems scored, mean rhyme distance {:.4}, mean TTR {:.4}",
        cards.len(),
        cards.iter().map(|c| c.rhyme.distance).sum::<f64>() / n,
        cards.iter().map(|c| c.ttr).sum::<f64>() / n,
    );
    let failed: Vec<bool> = cards
        .iter()
        .filter_map(|c| match &c.classification {
            Some(Classification::Failed { quota, .. }) => Some(*quota),
            _ => None,
        })
        .collect();
    if !failed.is_empty() {
        let quota = failed.iter().filter(|q| **q).count();
        return Err(external(anyhow!(
            "{} classification requests failed ({quota} on quota); scorecards written, rerun score to retry",
            failed.len()
        )));
    }
    Ok(())
}

fn read_cards(path: &Path) -> Result<Vec<PoemScorecard>, CliError> {
    require(path, "scorecards")?;
    Ok(read_jsonl(path, Some(SCORECARD_SCHEMA))?)
}

fn corpus_ttrs(path: &Path, include_punct: bool) -> Result<Vec<f64>, CliError> {
    require(path, "reference corpus")?;
    Ok(load_poems(path)?
        .iter()
        .map(|p| ttr(p, include_punct))
        .collect())
}

fn pct(x: f64) -> String {
    format!("{:.3}%", x * 100.0)
}

#[derive(Serialize)]
struct FilterSummary {
    schema: &'static str,
    ttr_threshold: f64,
    scored: usize,
    passed_syntax: usize,
    passed_ttr: usize,
    passed_classification: usize,
    accepted: usize,
}

pub fn filter(mut cfg: RunConfig, a: FilterArgs) -> CmdResult {
    if let Some(t) = &a.ttr_threshold {
        cfg.filter.ttr_threshold = match t.as_str() {
            "auto" => TtrThreshold::Auto,
            x => TtrThreshold::Fixed(
                x.parse()
                    .map_err(|_| usage(format!("bad --ttr-threshold {x:?}")))?,
            ),
        };
    }
    if let Some(stats) = &a.ttr_stats {
        let parsed: Option<(f64, f64)> = stats
            .split_once(',')
            .and_then(|(m, s)| Some((m.trim().parse().ok()?, s.trim().parse().ok()?)));
        let (mean, std) =
            parsed.ok_or_else(|| usage(format!("--ttr-stats expects MEAN,STD, got {stats:?}")))?;
        let t = threshold_from(mean, std);
        println!(
            "ttr threshold: {} (given mean {}, std {})",
            pct(t),
            pct(mean),
            pct(std)
        );
        cfg.filter.ttr_threshold = TtrThreshold::Fixed(t);
    }
    if let Some(m) = a.min_confidence {
        cfg.filter.min_classification_confidence = m;
    }
    if a.no_require_classified {
        cfg.filter.require_classified = false;
    }
    if a.reference.is_some() {
        cfg.paths.reference_corpus = a.reference;
    }
    if let Some(d) = a.out_dir {
        cfg.paths.output_dir = d;
    }
    cfg.filter.validate().map_err(usage)?;
    let cards = read_cards(&a.input)?;

    let resolved = match cfg.filter.ttr_threshold {
        TtrThreshold::Auto => {
            let reference = cfg
                .paths
                .reference_corpus
                .clone()
                .unwrap_or_else(|| cfg.paths.data_dir.join("train.txt"));
            let ttrs = corpus_ttrs(&reference, cfg.score.ttr_include_punct)?;
            let t = ttr_threshold(&ttrs)?;
            let (mean, std) = mean_std(&ttrs).expect("threshold needs values");
            println!(
                "ttr threshold: {} (reference mean {}, std {}, {} poems)",
                pct(t),
                pct(mean),
                pct(std),
                ttrs.len()
            );
            let mut f = cfg.filter.clone();
            f.ttr_threshold = TtrThreshold::Fixed(t);
            f
        }
        TtrThreshold::Fixed(t) => {
            if a.ttr_stats.is_none() {
                println!("ttr threshold: {}", pct(t));
            }
            cfg.filter.clone()
        }
    };
    let outcome = filter_and_rank(&cards, &resolved).map_err(pipeline_error)?;

    let out = cfg.paths.output_dir.clone();
    cfg.echo(&out, "filter")?;
    write_jsonl(&out.join("accepted.jsonl"), &outcome.accepted)?;
    write_jsonl(
        &out.join("rejected.jsonl"),
        outcome
            .rejected
            .iter()
            .map(|r| Tagged::new(REJECTION_SCHEMA, r)),
    )?;
    let summary = FilterSummary {
        schema: "limerick.filter-summary/1",
        ttr_threshold: outcome.ttr_threshold,
        scored: cards.len(),
        passed_syntax: outcome.passed_syntax,
        passed_ttr: outcome.passed_ttr,
        passed_classification: outcome.passed_classification,
        accepted: outcome.accepted.len(),
    };
    write_json(&out.join("filter.json"), &summary)?;
    println!(
        "{} scored, {} syntactic, {} above ttr threshold, {} classified, {} accepted",
        summary.scored,
        summary.passed_syntax,
        summary.passed_ttr,
        summary.passed_classification,
        summary.accepted
    );
    Ok(())
}

pub fn rank(mut cfg: RunConfig, a: RankArgs) -> CmdResult {
    if let Some(d) = a.out_dir {
        cfg.paths.output_dir = d;
    }
    let mut cards = read_cards(&a.input)?;
    cards.sort_by(PoemScorecard::rank_cmp);
    let out = cfg.paths.output_dir.clone();
    cfg.echo(&out, "rank")?;
    write_jsonl(&out.join("ranked.jsonl"), &cards)?;
    println!("{} scorecards ranked", cards.len());
    Ok(())
}

fn stats_line(name: &str, values: &[f64], percent: bool) -> String {
    let fmt = |x: f64| {
        if percent {
            format!("{:.3}", x * 100.0)
        } else {
            format!("{x:.4}")
        }
    };
    match mean_std(values) {
        Some((mean, std)) => {
            let max = values.iter().copied().fold(f64::MIN, f64::max);
            let min = values.iter().copied().fold(f64::MAX, f64::min);
            format!(
                "{name:<28}{:>10}{:>10}{:>10}{:>10}{:>8}\n",
                fmt(mean),
                fmt(std),
                fmt(max),
                fmt(min),
                values.len()
            )
        }
        None => format!(
            "{name:<28}{:>10}{:>10}{:>10}{:>10}{:>8}\n",
            "-", "-", "-", "-", 0
        ),
    }
}

fn write_hist(path: &Path, rows: impl Iterator<Item = (String, f64)>) -> anyhow::Result<()> {
    let mut text = String::from("poem_id\tvalue\n");
    for (id, v) in rows {
        writeln!(text, "{id}\t{v}").expect("writing to a String");
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn report(mut cfg: RunConfig, a: ReportArgs) -> CmdResult {
    if let Some(d) = a.out_dir {
        cfg.paths.output_dir = d;
    }
    let cards = read_cards(&a.input)?;
    let accepted = a.accepted.as_deref().map(read_cards).transpose()?;
    let attempts = match &a.attempts {
        Some(p) => {
            require(p, "attempt records")?;
            Some(read_attempts(p)?)
        }
        None => None,
    };
    let reference = a
        .corpus
        .as_deref()
        .map(|p| corpus_ttrs(p, cfg.score.ttr_include_punct))
        .transpose()?;

    let mut r = String::new();
    let header = format!(
        "{:<28}{:>10}{:>10}{:>10}{:>10}{:>8}\n",
        "", "mean", "std", "max", "min", "n"
    );
    writeln!(r, "poems scored: {}", cards.len()).ok();
    r.push('\n');
    r.push_str("lexical diversity (TTR, %)\n");
    r.push_str(&header);
    let ttrs: Vec<f64> = cards.iter().map(|c| c.ttr).collect();
    r.push_str(&stats_line("scored poems", &ttrs, true));
    if let Some(acc) = &accepted {
        let v: Vec<f64> = acc.iter().map(|c| c.ttr).collect();
        r.push_str(&stats_line("accepted poems", &v, true));
    }
    if let Some(v) = &reference {
        r.push_str(&stats_line("reference corpus", v, true));
        if let Ok(t) = ttr_threshold(v) {
            writeln!(r, "reference threshold (mean - 2 std): {}", pct(t)).ok();
        }
    }
    r.push('\n');

    r.push_str("rhyme distance\n");
    r.push_str(&header);
    let dists: Vec<f64> = cards.iter().map(|c| c.rhyme.distance).collect();
    r.push_str(&stats_line("scored poems", &dists, false));
    if let Some(acc) = &accepted {
        let v: Vec<f64> = acc.iter().map(|c| c.rhyme.distance).collect();
        r.push_str(&stats_line("accepted poems", &v, false));
    }
    let mut buckets = BTreeMap::new();
    for d in &dists {
        *buckets.entry(format!("{d:.2}")).or_insert(0usize) += 1;
    }
    let dist_counts: Vec<String> = buckets.iter().map(|(k, n)| format!("{k}: {n}")).collect();
    writeln!(r, "distribution: {}", dist_counts.join(", ")).ok();
    r.push('\n');

    r.push_str("subject continuity\n");
    r.push_str(&header);
    let centroid: Vec<f64> = cards
        .iter()
        .filter_map(|c| c.continuity.centroid_mean)
        .collect();
    r.push_str(&stats_line("centroid mean distance", &centroid, false));
    let sims: Vec<f64> = cards
        .iter()
        .filter_map(|c| c.continuity.ontology_avg_similarity)
        .collect();
    r.push_str(&stats_line("ontology path similarity", &sims, false));
    r.push('\n');

    let floor = cfg.filter.min_classification_confidence;
    let mut counts = [0usize; 5];
    for c in &cards {
        let i = match &c.classification {
            None => 4,
            Some(Classification::Failed { .. }) => 3,
            Some(Classification::Unclassified) => 2,
            Some(cl) if cl.max_confidence().is_some_and(|m| m > floor) => 0,
            Some(_) => 1,
        };
        counts[i] += 1;
    }
    r.push_str("classification\n");
    for (label, n) in [
        (format!("confidence > {floor}"), counts[0]),
        (format!("confidence <= {floor}"), counts[1]),
        ("unclassified".to_string(), counts[2]),
        ("request failed".to_string(), counts[3]),
        ("not run".to_string(), counts[4]),
    ] {
        writeln!(r, "  {label:<24}{n:>8}").ok();
    }
    r.push('\n');

    if let Some(att) = &attempts {
        let parsed = att
            .iter()
            .filter(|x| x.status == AttemptStatus::Parsed)
            .count();
        r.push_str("generation\n");
        writeln!(r, "  {:<24}{:>8}", "attempts", att.len()).ok();
        writeln!(r, "  {:<24}{:>8}", "parsed", parsed).ok();
        r.push('\n');
    }
    match &accepted {
        Some(acc) if acc.is_empty() => r.push_str("0 accepted\n"),
        Some(acc) => {
            writeln!(r, "{} accepted", acc.len()).ok();
            for (i, c) in acc.iter().take(10).enumerate() {
                let first = c.corrected.first().map(|l| l.join(" ")).unwrap_or_default();
                writeln!(
                    r,
                    "  {:>2}. {}  D={:.2} TTR={:.3}  {first}",
                    i + 1,
                    c.poem_id,
                    c.rhyme.distance,
                    c.ttr
                )
                .ok();
            }
        }
        None => {}
    }

    let out: PathBuf = cfg.paths.output_dir.clone();
    cfg.echo(&out, "report")?;
    std::fs::write(out.join("report.txt"), &r)?;
    write_hist(
        &out.join("hist_ttr.tsv"),
        cards.iter().map(|c| (c.poem_id.clone(), c.ttr)),
    )?;
    write_hist(
        &out.join("hist_rhyme_distance.tsv"),
        cards.iter().map(|c| (c.poem_id.clone(), c.rhyme.distance)),
    )?;
    write_hist(
        &out.join("hist_centroid_mean.tsv"),
        cards
            .iter()
            .filter_map(|c| c.continuity.centroid_mean.map(|m| (c.poem_id.clone(), m))),
    )?;
    print!("{r}");
    Ok(())
}
