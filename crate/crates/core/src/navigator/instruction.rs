//! Instructions, sub-goal extraction and the reasoner interface.
//!
//! A reasoner turns free text into an ordered list of landmark sub-goals
//! plus any literal motion directives ("turn left", "go straight"). The
//! bundled [`RuleReasoner`] works off a small fixed grammar;
//! [`ProcessReasoner`] forwards requests to an external program over
//! newline-delimited JSON.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReasonerError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("reasoner process I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("reasoner timed out after {0:?}")]
    Timeout(Duration),
    #[error("reasoner closed its output")]
    Closed,
    #[error("malformed reasoner response: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub text: String,
    pub tokens: Vec<String>,
}

impl Instruction {
    /// Lower-cases and splits on whitespace; punctuation other than `,` and
    /// `.` is dropped, those two become their own tokens.
    pub fn parse(text: &str) -> Result<Self, ReasonerError> {
        let mut tokens = Vec::new();
        for word in text.split_whitespace() {
            let mut cur = String::new();
            for c in word.chars() {
                if c == ',' || c == '.' || c == ';' {
                    if !cur.is_empty() {
                        tokens.push(std::mem::take(&mut cur));
                    }
                    tokens.push(",".to_string());
                } else if c.is_alphanumeric() || c == '-' || c == '\'' {
                    cur.extend(c.to_lowercase());
                }
            }
            if !cur.is_empty() {
                tokens.push(cur);
            }
        }
        if tokens.iter().all(|t| t == ",") {
            return Err(ReasonerError::EmptyInstruction);
        }
        Ok(Self {
            text: text.to_string(),
            tokens,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qualifier {
    Left,
    Right,
    Toward,
    Above,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoal {
    pub phrase: String,
    #[serde(default)]
    pub qualifier: Qualifier,
}

/// Landmark-free motion words taken literally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    TurnLeft,
    TurnRight,
    MoveLeft,
    MoveRight,
    Forward,
    Ascend,
    Descend,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoalList {
    pub goals: Vec<SubGoal>,
    #[serde(default)]
    pub directives: Vec<Directive>,
    /// The instruction asks to stop.
    #[serde(default)]
    pub stop: bool,
}

impl SubGoalList {
    pub fn is_empty(&self) -> bool {
        self.goals.is_empty() && self.directives.is_empty() && !self.stop
    }
}

/// Something that reads instructions (or answers clarification prompts).
pub trait Reasoner: Send {
    fn subgoals(&mut self, instruction: &Instruction, context: &str) -> Result<SubGoalList, ReasonerError>;

    /// Answer to a clarification question; the default has nothing to add.
    fn clarify(&mut self, _prompt: &str, _context: &str) -> Result<SubGoalList, ReasonerError> {
        Ok(SubGoalList::default())
    }
}

/// Runs the reasoner; failures become an empty list plus a diagnostic.
pub fn extract_subgoals(
    instruction: &Instruction,
    reasoner: &mut dyn Reasoner,
    context: &str,
) -> (SubGoalList, Option<String>) {
    match reasoner.subgoals(instruction, context) {
        Ok(list) => (list, None),
        Err(e) => (SubGoalList::default(), Some(e.to_string())),
    }
}

const ARTICLES: &[&str] = &["the", "a", "an", "that", "this"];
/// Words that end a landmark phrase.
const STOPWORDS: &[&str] = &[
    "then", "and", ",", "on", "at", "to", "toward", "towards", "until", "past", "before", "after", "near", "by", "of",
    "your", "side", "left", "right",
];

/// Deterministic grammar: `fly/go/head to X`, `fly toward X`, `pass X [on the
/// left|right]`, `turn left|right at X`, `turn at X`, `land on X`, and the
/// bare directives `turn left/right`, `move left/right`, `go straight`,
/// `rise up`, `descend`, `stop`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleReasoner;

impl RuleReasoner {
    pub fn parse(instruction: &Instruction) -> SubGoalList {
        let mut out = SubGoalList::default();
        for clause in instruction
            .tokens
            .split(|t| t == "," || t == "then" || t == "and")
            .filter(|c| !c.is_empty())
        {
            parse_clause(clause, &mut out);
        }
        out
    }
}

impl Reasoner for RuleReasoner {
    fn subgoals(&mut self, instruction: &Instruction, _context: &str) -> Result<SubGoalList, ReasonerError> {
        Ok(Self::parse(instruction))
    }
}

fn noun_phrase(words: &[String]) -> Option<(String, usize)> {
    let mut i = 0;
    while i < words.len() && ARTICLES.contains(&words[i].as_str()) {
        i += 1;
    }
    let start = i;
    while i < words.len() && !STOPWORDS.contains(&words[i].as_str()) {
        i += 1;
    }
    (i > start).then(|| (words[start..i].join(" "), i))
}

fn parse_clause(w: &[String], out: &mut SubGoalList) {
    let s = |i: usize| w.get(i).map(String::as_str).unwrap_or("");
    let mut i = 0;
    while i < w.len() {
        let (qualifier, skip) = match (s(i), s(i + 1), s(i + 2)) {
            ("fly" | "go" | "head" | "move", "to", _) => (Some(Qualifier::None), 2),
            ("fly" | "go" | "head" | "move", "toward" | "towards", _) => (Some(Qualifier::Toward), 2),
            ("land", "on", _) => (Some(Qualifier::Above), 2),
            ("turn", "left", "at") => (Some(Qualifier::Left), 3),
            ("turn", "right", "at") => (Some(Qualifier::Right), 3),
            ("turn", "at", _) => (Some(Qualifier::None), 2),
            ("pass", _, _) => (Some(Qualifier::None), 1),
            _ => (None, 0),
        };
        if let Some(mut q) = qualifier {
            if let Some((phrase, used)) = noun_phrase(&w[i + skip..]) {
                let mut j = i + skip + used;
                // "pass the gate on the left"
                if s(i) == "pass" && s(j) == "on" {
                    let k = if s(j + 1) == "the" || s(j + 1) == "your" {
                        j + 2
                    } else {
                        j + 1
                    };
                    match s(k) {
                        "left" => q = Qualifier::Left,
                        "right" => q = Qualifier::Right,
                        _ => {}
                    }
                    j = k + 1;
                }
                out.goals.push(SubGoal { phrase, qualifier: q });
                i = j;
                continue;
            }
        }
        let directive = match (s(i), s(i + 1)) {
            ("turn", "left") => Some(Directive::TurnLeft),
            ("turn", "right") => Some(Directive::TurnRight),
            ("move" | "go" | "fly" | "shift", "left") => Some(Directive::MoveLeft),
            ("move" | "go" | "fly" | "shift", "right") => Some(Directive::MoveRight),
            ("go" | "move" | "fly", "straight" | "forward" | "ahead") => Some(Directive::Forward),
            ("rise" | "go" | "fly", "up") => Some(Directive::Ascend),
            ("go" | "fly", "down") | ("pan", "down") => Some(Directive::Descend),
            _ => None,
        };
        if let Some(d) = directive {
            out.directives.push(d);
            i += 2;
            continue;
        }
        match s(i) {
            "ascend" | "climb" => out.directives.push(Directive::Ascend),
            "descend" => out.directives.push(Directive::Descend),
            "stop" | "halt" => out.stop = true,
            _ => {}
        }
        i += 1;
    }
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    text: &'a str,
    context: &'a str,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WireGoal {
    Phrase(String),
    Full(SubGoal),
}

#[derive(Debug, Deserialize)]
struct Response {
    #[serde(default)]
    subgoals: Vec<WireGoal>,
    #[serde(default)]
    action: Option<Directive>,
    #[serde(default)]
    stop: bool,
}

/// External reasoner speaking one JSON object per line over stdin/stdout.
///
/// Request: `{"type": "subgoals"|"clarify", "text": ..., "context": ...}`.
/// Response: `{"subgoals": ["red tower", {"phrase": .., "qualifier": ..}],
/// "action": "turn_left", "stop": false}` (all fields optional).
pub struct ProcessReasoner {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ProcessReasoner {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, ReasonerError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().ok_or(ReasonerError::Closed)?;
        let stdout = child.stdout.take().ok_or(ReasonerError::Closed)?;
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    fn ask(&mut self, kind: &str, text: &str, context: &str) -> Result<SubGoalList, ReasonerError> {
        let req = serde_json::to_string(&Request { kind, text, context })
            .map_err(|e| ReasonerError::Protocol(e.to_string()))?;
        writeln!(self.stdin, "{req}")?;
        self.stdin.flush()?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(line) => line?,
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(ReasonerError::Timeout(self.timeout)),
            Err(mpsc::RecvTimeoutError::Disconnected) => return Err(ReasonerError::Closed),
        };
        let resp: Response = serde_json::from_str(&line).map_err(|e| ReasonerError::Protocol(e.to_string()))?;
        Ok(SubGoalList {
            goals: resp
                .subgoals
                .into_iter()
                .map(|g| match g {
                    WireGoal::Phrase(phrase) => SubGoal {
                        phrase,
                        qualifier: Qualifier::None,
                    },
                    WireGoal::Full(g) => g,
                })
                .filter(|g| !g.phrase.trim().is_empty())
                .collect(),
            directives: resp.action.into_iter().collect(),
            stop: resp.stop,
        })
    }
}

impl Reasoner for ProcessReasoner {
    fn subgoals(&mut self, instruction: &Instruction, context: &str) -> Result<SubGoalList, ReasonerError> {
        self.ask("subgoals", &instruction.text, context)
    }

    fn clarify(&mut self, prompt: &str, context: &str) -> Result<SubGoalList, ReasonerError> {
        self.ask("clarify", prompt, context)
    }
}

impl Drop for ProcessReasoner {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
