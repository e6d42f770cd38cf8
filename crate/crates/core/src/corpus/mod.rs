//! Script corpora: domain types, line-delimited JSON loading, and
//! deterministic train/dev/eval splitting.
//!
//! Corpus files are UTF-8 with one JSON object per line:
//! `{"scenario_id": string, "main_event": string, "scripts": [[string, ...], ...]}`.

mod samples;
pub mod synth;

pub use samples::{
    build_candidate_pool, build_inclusive_samples, build_start_samples, build_temporal_samples,
    InclusiveLabel, InclusiveSample, StartSampleGroup, StartSamples, TemporalLabel, TemporalMode,
    TemporalSample,
};

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus file contains no scenarios")]
    EmptyCorpus,
    #[error("sub-event text is empty after trimming")]
    EmptySubEvent,
    #[error("script has no events")]
    EmptyScript,
    #[error("script contains duplicate event {0:?}")]
    DuplicateEvent(String),
    #[error("scenario {0:?} has no scripts")]
    NoScripts(String),
    #[error("split spec asks for {requested} scenarios but corpus has {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error("corpus has a single scenario; no negative pool exists")]
    NoNegativePool,
}

/// A single sub-event description, e.g. "gather dirty clothes".
/// Text is trimmed and guaranteed non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SubEvent {
    text: String,
}

impl SubEvent {
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into().trim().to_string();
        if text.is_empty() {
            return Err(CorpusError::EmptySubEvent);
        }
        Ok(SubEvent { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl fmt::Display for SubEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl TryFrom<String> for SubEvent {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        SubEvent::new(s)
    }
}

impl From<SubEvent> for String {
    fn from(e: SubEvent) -> String {
        e.text
    }
}

/// One crowd-written script: an ordered list of distinct sub-events.
/// The list order is the gold temporal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SubEvent>", into = "Vec<SubEvent>")]
pub struct Script {
    events: Vec<SubEvent>,
}

impl Script {
    pub fn new(events: Vec<SubEvent>) -> Result<Self, CorpusError> {
        if events.is_empty() {
            return Err(CorpusError::EmptyScript);
        }
        let mut seen = HashSet::new();
        for e in &events {
            if !seen.insert(e.text().to_string()) {
                return Err(CorpusError::DuplicateEvent(e.text().to_string()));
            }
        }
        Ok(Script { events })
    }

    /// Builds a script from raw strings, dropping repeated event texts
    /// (first occurrence wins). Returns the script and how many
    /// duplicates were dropped.
    pub fn from_texts_dedup(texts: &[String]) -> Result<(Self, usize), CorpusError> {
        let mut events = Vec::new();
        let mut seen = HashSet::new();
        let mut dropped = 0;
        for t in texts {
            let e = SubEvent::new(t.clone())?;
            if seen.insert(e.text().to_string()) {
                events.push(e);
            } else {
                dropped += 1;
            }
        }
        Ok((Script::new(events)?, dropped))
    }

    pub fn events(&self) -> &[SubEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first(&self) -> &SubEvent {
        &self.events[0]
    }
}

impl TryFrom<Vec<SubEvent>> for Script {
    type Error = CorpusError;
    fn try_from(events: Vec<SubEvent>) -> Result<Self, Self::Error> {
        Script::new(events)
    }
}

impl From<Script> for Vec<SubEvent> {
    fn from(s: Script) -> Vec<SubEvent> {
        s.events
    }
}

/// A main event with one or more gold scripts written for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub scenario_id: String,
    pub main_event: String,
    pub scripts: Vec<Script>,
}

impl Scenario {
    pub fn new(
        scenario_id: impl Into<String>,
        main_event: impl Into<String>,
        scripts: Vec<Script>,
    ) -> Result<Self, CorpusError> {
        let scenario_id = scenario_id.into();
        if scripts.is_empty() {
            return Err(CorpusError::NoScripts(scenario_id));
        }
        Ok(Scenario {
            scenario_id,
            main_event: main_event.into(),
            scripts,
        })
    }

    /// The longest script, ties broken by first occurrence.
    pub fn longest_script(&self) -> &Script {
        let mut best = &self.scripts[0];
        for s in &self.scripts[1..] {
            if s.len() > best.len() {
                best = s;
            }
        }
        best
    }
}

/// An ordered collection of scenarios with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ScriptCorpus {
    scenarios: Vec<Scenario>,
}

impl ScriptCorpus {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for (i, s) in scenarios.iter().enumerate() {
            if !ids.insert(s.scenario_id.clone()) {
                return Err(CorpusError::Parse {
                    line: i + 1,
                    message: format!("duplicate scenario_id {:?}", s.scenario_id),
                });
            }
        }
        Ok(ScriptCorpus { scenarios })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn get(&self, scenario_id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.scenario_id == scenario_id)
    }

    pub fn script_count(&self) -> usize {
        self.scenarios.iter().map(|s| s.scripts.len()).sum()
    }

    /// Writes the corpus in the line-delimited JSON schema, one
    /// scenario per line, preserving scenario order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), CorpusError> {
        for s in &self.scenarios {
            let raw = RawScenario {
                scenario_id: s.scenario_id.clone(),
                main_event: s.main_event.clone(),
                scripts: s
                    .scripts
                    .iter()
                    .map(|sc| sc.events.iter().map(|e| e.text().to_string()).collect())
                    .collect(),
            };
            serde_json::to_writer(&mut w, &raw).map_err(|e| CorpusError::Parse {
                line: 0,
                message: e.to_string(),
            })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let file = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct RawScenario {
    scenario_id: String,
    main_event: String,
    scripts: Vec<Vec<String>>,
}

/// Loads a corpus from a line-delimited JSON file.
///
/// Duplicate sub-events within a script are dropped with a logged
/// warning; any other schema violation is a parse error naming the
/// offending line.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<ScriptCorpus, CorpusError> {
    let file = std::fs::File::open(path.as_ref())?;
    read_corpus(std::io::BufReader::new(file))
}

/// Same as [`load_corpus`] but over any reader.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<ScriptCorpus, CorpusError> {
    let mut scenarios = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawScenario = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.main_event.trim().is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "main_event is empty".into(),
            });
        }
        if !ids.insert(raw.scenario_id.clone()) {
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("duplicate scenario_id {:?}", raw.scenario_id),
            });
        }
        let mut scripts = Vec::with_capacity(raw.scripts.len());
        for texts in &raw.scripts {
            let (script, dropped) =
                Script::from_texts_dedup(texts).map_err(|e| CorpusError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if dropped > 0 {
                log::warn!(
                    "scenario {:?}: dropped {} duplicate sub-event(s) from one script",
                    raw.scenario_id,
                    dropped
                );
            }
            scripts.push(script);
        }
        let scenario = Scenario::new(raw.scenario_id, raw.main_event, scripts).map_err(|e| {
            CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            }
        })?;
        scenarios.push(scenario);
    }
    if scenarios.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    ScriptCorpus::new(scenarios)
}

/// Requested split sizes plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_dev: usize,
    pub n_eval: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn total(&self) -> usize {
        self.n_train + self.n_dev + self.n_eval
    }
}

/// Scenario-level disjoint split, deterministic given the seed.
///
/// Train and dev keep every script. Each eval scenario is reduced to
/// exactly one script — the longest by event count, ties broken by
/// first occurrence in file order.
pub fn split_corpus(
    corpus: &ScriptCorpus,
    spec: &SplitSpec,
) -> Result<(ScriptCorpus, ScriptCorpus, ScriptCorpus), CorpusError> {
    if spec.total() > corpus.len() {
        return Err(CorpusError::SplitTooLarge {
            requested: spec.total(),
            available: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let pick = |slice: &[usize], reduce_eval: bool| -> Result<ScriptCorpus, CorpusError> {
        let mut idxs = slice.to_vec();
        idxs.sort_unstable(); // keep original corpus order within a split
        let scenarios = idxs
            .into_iter()
            .map(|i| {
                let s = &corpus.scenarios[i];
                if reduce_eval {
                    Scenario::new(
                        s.scenario_id.clone(),
                        s.main_event.clone(),
                        vec![s.longest_script().clone()],
                    )
                } else {
                    Ok(s.clone())
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        ScriptCorpus::new(scenarios)
    };

    let train = pick(&order[..spec.n_train], false)?;
    let dev = pick(&order[spec.n_train..spec.n_train + spec.n_dev], false)?;
    let eval = pick(
        &order[spec.n_train + spec.n_dev..spec.total()],
        true,
    )?;
    Ok((train, dev, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn corpus_line(id: &str, main: &str, scripts: &[&[&str]]) -> String {
        serde_json::to_string(&RawScenario {
            scenario_id: id.to_string(),
            main_event: main.to_string(),
            scripts: scripts
                .iter()
                .map(|s| s.iter().map(|t| t.to_string()).collect())
                .collect(),
        })
        .unwrap()
    }

    #[test]
    fn load_single_scenario_two_scripts() {
        let data = corpus_line("s1", "clean laundry", &[&["a", "b"], &["a", "c", "d"]]);
        let corpus = read_corpus(Cursor::new(data)).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.script_count(), 2);
    }

    #[test]
    fn missing_main_event_is_a_parse_error_with_line() {
        let good = corpus_line("s1", "clean laundry", &[&["a"]]);
        let bad = r#"{"scenario_id": "s2", "scripts": [["x"]]}"#;
        let err = read_corpus(Cursor::new(format!("{good}\n{bad}"))).unwrap_err();
        match err {
            CorpusError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus_error() {
        let err = read_corpus(Cursor::new("")).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyCorpus));
    }

    #[test]
    fn duplicate_events_dropped_on_load() {
        let data = corpus_line("s1", "m", &[&["a", "b", "a", "c"]]);
        let corpus = read_corpus(Cursor::new(data)).unwrap();
        let script = &corpus.scenarios()[0].scripts[0];
        assert_eq!(
            script.events().iter().map(|e| e.text()).collect::<Vec<_>>(),
            vec!["a", "b", "c"]
        );
    }

    #[test]
    fn duplicate_scenario_id_rejected() {
        let l1 = corpus_line("s1", "m1", &[&["a"]]);
        let l2 = corpus_line("s1", "m2", &[&["b"]]);
        let err = read_corpus(Cursor::new(format!("{l1}\n{l2}"))).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn empty_sub_event_rejected() {
        let data = corpus_line("s1", "m", &[&["a", "   "]]);
        let err = read_corpus(Cursor::new(data)).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
    }

    #[test]
    fn roundtrip_preserves_bytes() {
        let data = format!(
            "{}\n{}\n",
            corpus_line("s1", "m1", &[&["a", "b"]]),
            corpus_line("s2", "m2", &[&["c"], &["d", "e"]])
        );
        let corpus = read_corpus(Cursor::new(data.clone())).unwrap();
        let mut out = Vec::new();
        corpus.write_jsonl(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), data);
    }

    fn synth_corpus(n: usize) -> ScriptCorpus {
        let scenarios = (0..n)
            .map(|i| {
                let events = vec![
                    SubEvent::new(format!("step one of {i}")).unwrap(),
                    SubEvent::new(format!("step two of {i}")).unwrap(),
                ];
                Scenario::new(
                    format!("s{i}"),
                    format!("task {i}"),
                    vec![Script::new(events).unwrap()],
                )
                .unwrap()
            })
            .collect();
        ScriptCorpus::new(scenarios).unwrap()
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let corpus = synth_corpus(197);
        let spec = SplitSpec { n_train: 98, n_dev: 39, n_eval: 60, seed: 11 };
        let (train, dev, eval) = split_corpus(&corpus, &spec).unwrap();
        assert_eq!((train.len(), dev.len(), eval.len()), (98, 39, 60));
        let ids = |c: &ScriptCorpus| {
            c.scenarios()
                .iter()
                .map(|s| s.scenario_id.clone())
                .collect::<HashSet<_>>()
        };
        let (a, b, c) = (ids(&train), ids(&dev), ids(&eval));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.len() + b.len() + c.len(), 197);
    }

    #[test]
    fn split_is_deterministic() {
        let corpus = synth_corpus(50);
        let spec = SplitSpec { n_train: 20, n_dev: 10, n_eval: 15, seed: 3 };
        let a = split_corpus(&corpus, &spec).unwrap();
        let b = split_corpus(&corpus, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_too_large_errors() {
        let corpus = synth_corpus(10);
        let spec = SplitSpec { n_train: 8, n_dev: 2, n_eval: 1, seed: 0 };
        assert!(matches!(
            split_corpus(&corpus, &spec),
            Err(CorpusError::SplitTooLarge { .. })
        ));
    }

    #[test]
    fn eval_reduction_keeps_first_longest() {
        let scripts = vec![
            Script::from_texts_dedup(&["a".into(), "b".into(), "c".into()]).unwrap().0,
            Script::from_texts_dedup(&["d".into(), "e".into(), "f".into(), "g".into(), "h".into()])
                .unwrap()
                .0,
            Script::from_texts_dedup(&["i".into(), "j".into(), "k".into(), "l".into(), "m".into()])
                .unwrap()
                .0,
        ];
        let scenario = Scenario::new("s", "m", scripts).unwrap();
        assert_eq!(scenario.longest_script().first().text(), "d");
    }
}
