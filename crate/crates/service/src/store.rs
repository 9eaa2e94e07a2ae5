//! Annotation queue plus an append-only vote log.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use psyling::corpus::{Corpus, ImportOptions, Record};
use psyling::{ByCharacteristic, Error, Result};
use serde::{Deserialize, Serialize};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const VOTE_LOG: &str = "votes.jsonl";

/// One line of the vote log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteEntry {
    pub annotator: String,
    pub utterance_id: String,
    pub votes: ByCharacteristic<bool>,
    pub difficulty: bool,
}

pub fn parse_vote_log(input: &str) -> Result<Vec<VoteEntry>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: VoteEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        if entry.annotator.is_empty() {
            return Err(Error::Schema {
                line: i + 1,
                message: "empty annotator id".into(),
            });
        }
        out.push(entry);
    }
    Ok(out)
}

#[derive(Debug)]
pub enum VoteError {
    UnknownUtterance(String),
    Duplicate { annotator: String, utterance_id: String },
    Io(std::io::Error),
}

/// Immutable view of the store; replaced wholesale on every vote.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    corpus: Arc<Corpus>,
    index: Arc<HashMap<String, usize>>,
    /// Record positions in id order.
    queue: Arc<Vec<usize>>,
    votes: BTreeMap<String, BTreeMap<String, VoteEntry>>,
    n_votes: usize,
}

impl Snapshot {
    fn new(corpus: Corpus) -> Self {
        let index: HashMap<String, usize> = corpus.records().iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        let mut queue: Vec<usize> = (0..corpus.len()).collect();
        queue.sort_by(|&a, &b| corpus.records()[a].id.cmp(&corpus.records()[b].id));
        Snapshot {
            corpus: Arc::new(corpus),
            index: Arc::new(index),
            queue: Arc::new(queue),
            votes: BTreeMap::new(),
            n_votes: 0,
        }
    }

    fn check(&self, entry: &VoteEntry) -> std::result::Result<(), VoteError> {
        if !self.index.contains_key(&entry.utterance_id) {
            return Err(VoteError::UnknownUtterance(entry.utterance_id.clone()));
        }
        if self
            .votes
            .get(&entry.utterance_id)
            .is_some_and(|m| m.contains_key(&entry.annotator))
        {
            return Err(VoteError::Duplicate {
                annotator: entry.annotator.clone(),
                utterance_id: entry.utterance_id.clone(),
            });
        }
        Ok(())
    }

    fn insert(&mut self, entry: VoteEntry) {
        self.votes
            .entry(entry.utterance_id.clone())
            .or_default()
            .insert(entry.annotator.clone(), entry);
        self.n_votes += 1;
    }

    pub fn n_utterances(&self) -> usize {
        self.corpus.len()
    }

    pub fn n_votes(&self) -> usize {
        self.n_votes
    }

    fn voted(&self, annotator: &str, id: &str) -> bool {
        self.votes.get(id).is_some_and(|m| m.contains_key(annotator))
    }

    /// Earliest utterance (by id) the annotator has not voted on, and the
    /// number still open for them.
    pub fn next_for(&self, annotator: &str) -> (Option<&Record>, usize) {
        let mut open = self
            .queue
            .iter()
            .map(|&i| &self.corpus.records()[i])
            .filter(|r| !self.voted(annotator, &r.id));
        let first = open.next();
        let remaining = first.map_or(0, |_| 1 + open.count());
        (first, remaining)
    }

    /// Stored records with logged votes appended in annotator-id order.
    pub fn merged(&self) -> Corpus {
        let records = self
            .corpus
            .records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                if let Some(logged) = self.votes.get(&r.id) {
                    let mut difficulty = r.difficulty_votes.take().unwrap_or_default();
                    for e in logged.values() {
                        for (c, &v) in e.votes.iter() {
                            r.votes[c].push(v);
                        }
                        difficulty.push(e.difficulty);
                    }
                    r.difficulty_votes = (!difficulty.is_empty()).then_some(difficulty);
                }
                r
            })
            .collect();
        Corpus::from_records(records).expect("merged records stay valid")
    }
}

pub struct AnnotationStore {
    snapshot: ArcSwap<Snapshot>,
    writer: Mutex<Option<File>>,
    dir: Option<PathBuf>,
}

impl AnnotationStore {
    pub fn in_memory(corpus: Corpus) -> Self {
        AnnotationStore {
            snapshot: ArcSwap::from_pointee(Snapshot::new(corpus)),
            writer: Mutex::new(None),
            dir: None,
        }
    }

    /// Loads `corpus.jsonl` (unannotated records allowed) and replays the
    /// vote log from `dir`, creating the log if needed.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let corpus_path = dir.join(CORPUS_FILE);
        let corpus = if corpus_path.exists() {
            Corpus::parse_jsonl_with(&std::fs::read_to_string(&corpus_path)?, ImportOptions { allow_unannotated: true })?
        } else {
            Corpus::default()
        };
        let mut snap = Snapshot::new(corpus);
        let log_path = dir.join(VOTE_LOG);
        if log_path.exists() {
            let text = std::fs::read_to_string(&log_path)?;
            if !text.is_empty() && !text.ends_with('\n') {
                return Err(Error::Format {
                    line: text.lines().count(),
                    message: "vote log ends in a partial line".into(),
                });
            }
            for (i, entry) in parse_vote_log(&text)?.into_iter().enumerate() {
                snap.check(&entry).map_err(|e| Error::Schema {
                    line: i + 1,
                    message: format!("{e:?}"),
                })?;
                snap.insert(entry);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok(AnnotationStore {
            snapshot: ArcSwap::from_pointee(snap),
            writer: Mutex::new(Some(file)),
            dir: Some(dir.to_path_buf()),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.load_full()
    }

    /// Appends and fsyncs the vote, then publishes a new snapshot. Writers
    /// are serialized; readers keep the previous snapshot until then.
    pub fn append(&self, entry: VoteEntry) -> std::result::Result<(), VoteError> {
        let mut writer = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let current = self.snapshot.load_full();
        current.check(&entry)?;
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("vote serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(VoteError::Io)?;
            file.sync_data().map_err(VoteError::Io)?;
        }
        let mut next = (*current).clone();
        next.insert(entry);
        self.snapshot.store(Arc::new(next));
        Ok(())
    }
}
