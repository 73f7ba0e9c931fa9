//! Line-delimited JSON over stdio, exposing a wrapped environment to
//! external RL code.
//!
//! Requests are `{"cmd": "reset"|"step"|"spec"|"close", "id"?, "seed"?,
//! "action"?}`. Every response carries an `id`: the request's own id when it
//! sent one (ids must increase), otherwise one past the previous response.
//! Floats are written with shortest round-trip formatting, so a client that
//! parses them exactly sees the same bits as a native rollout.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use saute_core::envs::{make_fixture, FiniteCmdpEnv, Gridworld, PendulumEnv};
use saute_core::eval::EnvConfig;
use saute_core::saute::{INFO_NEXT_SAFE_STATE, INFO_SAFETY_COST, INFO_TRUE_COST};
use saute_core::{CmdpSpec, Environment, SauteConfig, SauteEnv};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cmd {
    Reset,
    Step,
    Spec,
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub cmd: Cmd,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepInfo {
    pub true_cost: f64,
    pub safety_cost: f64,
    pub next_safe_state: f64,
}

/// Info keys in wire order.
pub const INFO_KEYS: [&str; 3] = [INFO_TRUE_COST, INFO_SAFETY_COST, INFO_NEXT_SAFE_STATE];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub done: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<StepInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CmdpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info_keys: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Protocol state around one environment.
pub struct Server<E> {
    env: E,
    last_id: u64,
    started: bool,
    done: bool,
}

impl<E: Environment> Server<E> {
    pub fn new(env: E) -> Self {
        Server { env, last_id: 0, started: false, done: false }
    }

    /// Handles one request line. The flag is true after `close`.
    pub fn handle_line(&mut self, line: &str) -> (Response, bool) {
        let req: Request = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => return (self.error(None, format!("malformed request: {e}")), false),
        };
        if let Some(id) = req.id {
            if id <= self.last_id {
                return (self.error(None, format!("request id {id} not above previous id {}", self.last_id)), false);
            }
        }
        let id = req.id.unwrap_or(self.last_id + 1);
        self.last_id = id;
        match req.cmd {
            Cmd::Reset => match self.env.reset(req.seed.unwrap_or(0)) {
                Ok(obs) => {
                    self.started = true;
                    self.done = false;
                    (Response { id, obs: Some(obs), ..Default::default() }, false)
                }
                Err(e) => (self.error(Some(id), e.to_string()), false),
            },
            Cmd::Step => (self.step(id, req.action.as_deref()), false),
            Cmd::Spec => (
                Response {
                    id,
                    spec: Some(self.env.spec().clone()),
                    version: Some(saute_core::VERSION.to_string()),
                    info_keys: Some(INFO_KEYS.iter().map(|k| k.to_string()).collect()),
                    ..Default::default()
                },
                false,
            ),
            Cmd::Close => (Response { id, ..Default::default() }, true),
        }
    }

    fn step(&mut self, id: u64, action: Option<&[f64]>) -> Response {
        if !self.started {
            return self.error(Some(id), "step before reset".into());
        }
        if self.done {
            return self.error(Some(id), saute_core::Error::EpisodeFinished.to_string());
        }
        let Some(values) = action else {
            return self.error(Some(id), "step needs an action array".into());
        };
        let result = self.env.spec().action_space.action_from_values(values).and_then(|a| self.env.step(&a));
        match result {
            Ok(tr) => {
                self.done = tr.done;
                let get = |k| tr.info.get(k).unwrap_or(f64::NAN);
                Response {
                    id,
                    obs: Some(tr.observation),
                    cost: Some(tr.task_cost),
                    done: Some(tr.done),
                    info: Some(StepInfo {
                        true_cost: get(INFO_TRUE_COST),
                        safety_cost: get(INFO_SAFETY_COST),
                        next_safe_state: get(INFO_NEXT_SAFE_STATE),
                    }),
                    ..Default::default()
                }
            }
            Err(e) => self.error(Some(id), e.to_string()),
        }
    }

    fn error(&mut self, id: Option<u64>, message: String) -> Response {
        let id = id.unwrap_or_else(|| {
            self.last_id += 1;
            self.last_id
        });
        Response { id, error: Some(message), ..Default::default() }
    }

    /// Serves until `close` or end of input.
    pub fn serve<R: BufRead, W: Write>(&mut self, input: R, mut output: W) -> std::io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (resp, close) = self.handle_line(&line);
            serde_json::to_writer(&mut output, &resp)?;
            output.write_all(b"\n")?;
            output.flush()?;
            if close {
                break;
            }
        }
        Ok(())
    }
}

/// Builds the wrapped environment named in a bridge config and serves it.
pub fn serve_config<R: BufRead, W: Write>(
    environment: &EnvConfig,
    saute: &SauteConfig,
    input: R,
    output: W,
) -> crate::error::CliResult<()> {
    let io = |e| crate::error::CliError::io(std::path::Path::new("<stdio>"), e);
    match environment {
        EnvConfig::Pendulum { params } => {
            let env = SauteEnv::new(PendulumEnv::new(params.clone())?, saute.clone())?;
            Server::new(env).serve(input, output).map_err(io)
        }
        EnvConfig::Gridworld { params } => {
            let env = SauteEnv::new(Gridworld::new(params.clone())?.env()?, saute.clone())?;
            Server::new(env).serve(input, output).map_err(io)
        }
        EnvConfig::Fixture { name } => {
            let env = SauteEnv::new(FiniteCmdpEnv::new(make_fixture(name)?)?, saute.clone())?;
            Server::new(env).serve(input, output).map_err(io)
        }
    }
}
