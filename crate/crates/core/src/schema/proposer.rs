use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::OTHER;
use crate::error::{Error, Result};
use crate::model::{Attribute, AttributeSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraints {
    pub min_values: usize,
    pub max_values: usize,
    pub require_other: bool,
}

impl Default for Constraints {
    fn default() -> Self {
        Self { min_values: 3, max_values: 8, require_other: true }
    }
}

/// Sent back to the proposer after an unusable response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairHint {
    pub previous_output: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposeRequest {
    pub current_schema: AttributeSchema,
    pub observations: Vec<String>,
    pub constraints: Constraints,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairHint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignRequest {
    pub schema: AttributeSchema,
    pub captions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<RepairHint>,
}

/// One request document. Serialized with a `"task"` field of `"propose"` or `"assign"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum ProposerRequest {
    Propose(ProposeRequest),
    Assign(AssignRequest),
}

/// `{"schema": ...}` or `{"error": ...}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProposerResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<AttributeSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `{"assignments": [{attribute: value}, ...]}` or `{"error": ...}`.
///
/// A value is either a value name or a value index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssignResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<Vec<BTreeMap<String, serde_json::Value>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Anything that answers request documents with response documents.
///
/// Transport failures are `Error::Proposer`; the returned text is parsed by the caller.
pub trait Proposer {
    fn call(&mut self, request: &ProposerRequest) -> Result<String>;
}

impl<P: Proposer + ?Sized> Proposer for Box<P> {
    fn call(&mut self, request: &ProposerRequest) -> Result<String> {
        (**self).call(request)
    }
}

/// Opens `mock:<rules.json>`, `pipe:<command line>` or an `http://` URL.
pub fn open_proposer(spec: &str) -> Result<Box<dyn Proposer>> {
    if let Some(path) = spec.strip_prefix("mock:") {
        Ok(Box::new(MockProposer::from_file(path)?))
    } else if let Some(cmd) = spec.strip_prefix("pipe:") {
        Ok(Box::new(PipeProposer::spawn_command_line(cmd)?))
    } else if spec.starts_with("http://") || spec.starts_with("https://") {
        Ok(Box::new(HttpProposer::new(spec)))
    } else {
        Err(Error::invalid(format!("unrecognised proposer '{spec}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordAttribute {
    pub name: String,
    #[serde(default)]
    pub definition: String,
    /// Value name to the keywords that select it, in priority order.
    pub values: Vec<KeywordValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordValue {
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeywordRules {
    pub attributes: Vec<KeywordAttribute>,
}

/// Deterministic keyword-rule proposer.
///
/// Proposing keeps every attribute of the current schema and adds any attribute
/// with a keyword in the observations, always with its full value list plus `other`.
/// Assignment picks the first value whose keyword occurs in the caption.
#[derive(Debug, Clone)]
pub struct MockProposer {
    rules: KeywordRules,
}

impl MockProposer {
    pub fn new(rules: KeywordRules) -> Self {
        Self { rules }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(serde_json::from_str(&text)?))
    }

    fn matches(value: &KeywordValue, text: &str) -> bool {
        value.keywords.iter().any(|k| text.contains(&k.to_lowercase()))
    }

    fn propose(&self, req: &ProposeRequest) -> ProposerResponse {
        let observed: Vec<String> = req.observations.iter().map(|o| o.to_lowercase()).collect();
        let attributes = self
            .rules
            .attributes
            .iter()
            .filter(|rule| {
                req.current_schema.attribute(&rule.name).is_some()
                    || rule.values.iter().any(|v| observed.iter().any(|o| Self::matches(v, o)))
            })
            .map(|rule| {
                let mut values: Vec<String> = rule.values.iter().map(|v| v.name.clone()).collect();
                values.push(OTHER.to_string());
                Attribute { name: rule.name.clone(), definition: rule.definition.clone(), values }
            })
            .collect();
        ProposerResponse { schema: Some(AttributeSchema::new(attributes)), error: None }
    }

    fn assign(&self, req: &AssignRequest) -> AssignResponse {
        let assignments = req
            .captions
            .iter()
            .map(|caption| {
                let text = caption.to_lowercase();
                req.schema
                    .attributes
                    .iter()
                    .map(|attr| {
                        let value = self
                            .rules
                            .attributes
                            .iter()
                            .find(|r| r.name == attr.name)
                            .and_then(|r| r.values.iter().find(|v| Self::matches(v, &text)))
                            .map_or(OTHER, |v| v.name.as_str());
                        (attr.name.clone(), serde_json::Value::from(value))
                    })
                    .collect()
            })
            .collect();
        AssignResponse { assignments: Some(assignments), error: None }
    }
}

impl Proposer for MockProposer {
    fn call(&mut self, request: &ProposerRequest) -> Result<String> {
        let text = match request {
            ProposerRequest::Propose(req) => serde_json::to_string(&self.propose(req))?,
            ProposerRequest::Assign(req) => serde_json::to_string(&self.assign(req))?,
        };
        Ok(text)
    }
}

/// POSTs each request document to a URL and returns the response body.
pub struct HttpProposer {
    url: String,
    agent: ureq::Agent,
}

impl HttpProposer {
    pub fn new(url: impl Into<String>) -> Self {
        Self::with_timeout(url, Duration::from_secs(120))
    }

    pub fn with_timeout(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().new_agent();
        Self { url: url.into(), agent }
    }
}

impl Proposer for HttpProposer {
    fn call(&mut self, request: &ProposerRequest) -> Result<String> {
        let body = serde_json::to_string(request)?;
        self.agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body.as_str())
            .and_then(|mut resp| resp.body_mut().read_to_string())
            .map_err(|e| Error::Proposer(format!("{}: {e}", self.url)))
    }
}

/// Long-lived child process speaking one JSON document per line on stdin/stdout.
pub struct PipeProposer {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl PipeProposer {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Proposer(format!("cannot start '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { child, stdin, stdout })
    }

    /// Splits on whitespace; the first word is the program.
    pub fn spawn_command_line(cmd: &str) -> Result<Self> {
        let mut words = cmd.split_whitespace().map(str::to_string);
        let program = words.next().ok_or_else(|| Error::invalid("empty pipe command"))?;
        let args: Vec<String> = words.collect();
        Self::spawn(&program, &args)
    }
}

impl Proposer for PipeProposer {
    fn call(&mut self, request: &ProposerRequest) -> Result<String> {
        let pipe_err = |e: std::io::Error| Error::Proposer(format!("pipe: {e}"));
        let mut line = serde_json::to_string(request)?;
        line.push('\n');
        self.stdin.write_all(line.as_bytes()).map_err(pipe_err)?;
        self.stdin.flush().map_err(pipe_err)?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply).map_err(pipe_err)? == 0 {
            return Err(Error::Proposer("pipe: proposer closed its output".into()));
        }
        Ok(reply)
    }
}

impl Drop for PipeProposer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
