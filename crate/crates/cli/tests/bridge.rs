use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use saute_cli::bridge::{Response, Server, INFO_KEYS};
use saute_cli::config::{load, BridgeConfig};
use saute_core::envs::{PendulumEnv, TWO_CORRIDOR};
use saute_core::eval::EnvConfig;
use saute_core::{Action, Environment, SauteEnv};

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/bridge-pendulum.json");

struct Engine {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Engine {
    fn spawn() -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_saute"))
            .args(["serve", CONFIG])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .unwrap();
        let stdin = child.stdin.take().unwrap();
        let stdout = BufReader::new(child.stdout.take().unwrap());
        Engine { child, stdin, stdout }
    }

    fn raw(&mut self, line: &str) -> String {
        writeln!(self.stdin, "{line}").unwrap();
        self.stdin.flush().unwrap();
        let mut out = String::new();
        self.stdout.read_line(&mut out).unwrap();
        assert!(out.ends_with('\n'), "child closed: {out:?}");
        out
    }

    fn call(&mut self, line: &str) -> Response {
        let raw = self.raw(line);
        serde_json::from_str(&raw).unwrap_or_else(|e| panic!("{e}: {raw}"))
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn native_env() -> SauteEnv<PendulumEnv> {
    let (cfg, _) = load::<BridgeConfig>(Path::new(CONFIG)).unwrap();
    let EnvConfig::Pendulum { params } = cfg.environment else { panic!("pendulum config expected") };
    SauteEnv::new(PendulumEnv::new(params).unwrap(), cfg.saute).unwrap()
}

fn torque(t: usize, obs: &[f64]) -> f64 {
    // pump energy along the angular velocity, sometimes past the torque
    // limit so clipping is exercised too
    let push = if obs[2] >= 0.0 { 1.0 } else { -1.0 };
    push * (2.0 + 0.5 * (0.37 * t as f64).sin())
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn thousand_step_episode_matches_native_bit_for_bit() {
    let mut native = native_env();
    let mut bridge = Engine::spawn();
    let seed = 3;

    let mut obs = native.reset(seed).unwrap();
    let r = bridge.call(&format!(r#"{{"cmd": "reset", "seed": {seed}}}"#));
    assert_eq!(bits(&r.obs.unwrap()), bits(&obs));

    let mut violated = false;
    for t in 0..1000 {
        let a = torque(t, &obs);
        let tr = native.step(&Action::continuous(&[a])).unwrap();
        obs = tr.observation.clone();
        let line = serde_json::json!({ "cmd": "step", "action": [a] }).to_string();
        let r = bridge.call(&line);
        assert_eq!(r.error, None, "step {t}");
        assert_eq!(bits(&r.obs.unwrap()), bits(&tr.observation), "obs at step {t}");
        assert_eq!(r.cost.unwrap().to_bits(), tr.task_cost.to_bits(), "cost at step {t}");
        assert_eq!(r.done, Some(tr.done));
        let info = r.info.unwrap();
        assert_eq!(info.true_cost.to_bits(), tr.info.get("true_cost").unwrap().to_bits());
        assert_eq!(info.safety_cost.to_bits(), tr.info.get("safety_cost").unwrap().to_bits());
        assert_eq!(info.next_safe_state.to_bits(), tr.info.get("next_safe_state").unwrap().to_bits());
        violated |= info.next_safe_state < 0.0;
        assert_eq!(tr.done, t == 999);
    }
    // pumping overdraws the budget, so reshaped costs are covered
    assert!(violated);

    let after = bridge.call(r#"{"cmd": "step", "action": [0.0]}"#);
    assert!(after.error.unwrap().contains("finished episode"));
    assert!(native.step(&Action::continuous(&[0.0])).is_err());
}

#[test]
fn info_keys_are_character_exact() {
    assert_eq!(INFO_KEYS, ["true_cost", "safety_cost", "next_safe_state"]);
    let mut bridge = Engine::spawn();
    bridge.call(r#"{"cmd": "reset", "seed": 0}"#);
    let raw = bridge.raw(r#"{"cmd": "step", "action": [1.0]}"#);
    let v: serde_json::Value = serde_json::from_str(&raw).unwrap();
    let keys: Vec<&str> = v["info"].as_object().unwrap().keys().map(String::as_str).collect();
    let mut want = INFO_KEYS.to_vec();
    want.sort();
    let mut got = keys.clone();
    got.sort();
    assert_eq!(got, want);
    assert!(raw.contains(r#""info":{"true_cost":"#), "{raw}");

    let spec = bridge.call(r#"{"cmd": "spec"}"#);
    assert_eq!(spec.info_keys.unwrap(), INFO_KEYS);
    assert_eq!(spec.version.unwrap(), saute_core::VERSION);
    // cos, sin, angular velocity and z
    assert_eq!(spec.spec.unwrap().state_dim, 4);
}

#[test]
fn reset_twice_is_identical_and_ids_increase() {
    let mut bridge = Engine::spawn();
    let a = bridge.call(r#"{"cmd": "reset", "seed": 0}"#);
    let b = bridge.call(r#"{"cmd": "reset", "seed": 0}"#);
    assert_eq!(bits(a.obs.as_ref().unwrap()), bits(b.obs.as_ref().unwrap()));
    assert_eq!((a.id, b.id), (1, 2));
    // z is the last observation component and starts at 1 when normalized
    assert_eq!(*a.obs.unwrap().last().unwrap(), 1.0);

    let c = bridge.call(r#"{"cmd": "step", "id": 10, "action": [0.5]}"#);
    assert_eq!(c.id, 10);
    let d = bridge.call(r#"{"cmd": "step", "action": [0.5]}"#);
    assert_eq!(d.id, 11);
    let stale = bridge.call(r#"{"cmd": "step", "id": 4, "action": [0.5]}"#);
    assert!(stale.error.unwrap().contains("not above"));
    assert!(stale.id > 11);
    let closed = bridge.call(r#"{"cmd": "close"}"#);
    assert_eq!(closed.error, None);
    assert!(bridge.child.wait().unwrap().success());
}

#[test]
fn protocol_errors_are_reported_in_band() {
    let env = native_env();
    let mut server = Server::new(env);
    let (r, close) = server.handle_line("not json");
    assert!(r.error.unwrap().starts_with("malformed request"));
    assert!(!close);
    let (r, _) = server.handle_line(r#"{"cmd": "step", "action": [0.0]}"#);
    assert_eq!(r.error.unwrap(), "step before reset");
    let (r, _) = server.handle_line(r#"{"cmd": "warp"}"#);
    assert!(r.error.is_some());
    let (r, _) = server.handle_line(r#"{"cmd": "reset", "bogus": 1}"#);
    assert!(r.error.is_some());
    server.handle_line(r#"{"cmd": "reset"}"#);
    let (r, _) = server.handle_line(r#"{"cmd": "step"}"#);
    assert!(r.error.unwrap().contains("action"));
    let (r, _) = server.handle_line(r#"{"cmd": "step", "action": [0.0, 1.0]}"#);
    assert!(r.error.unwrap().contains("expected 1 components"));
    let (r, close) = server.handle_line(r#"{"cmd": "close"}"#);
    assert!(close && r.error.is_none());
    assert_eq!(r.id, 8);
}

#[test]
fn serves_tabular_environments() {
    let cfg: BridgeConfig = serde_json::from_value(serde_json::json!({
        "schema_version": "1",
        "environment": { "kind": "gridworld", "params": {
            "layout": TWO_CORRIDOR,
            "step_task_cost": 1.0, "hazard_task_cost": 0.5, "hazard_safety_cost": 6.0,
            "slip_probability": 0.0, "horizon": 30, "gamma_c": 0.99, "gamma_l": 1.0, "budget_d": 6.0
        }},
        "saute": { "budget": { "kind": "fixed", "d": 6.0 }, "gamma_l": 1.0, "reshape_n": 200.0, "normalize": true }
    }))
    .unwrap();
    let input =
        "{\"cmd\":\"reset\",\"seed\":1}\n{\"cmd\":\"step\",\"action\":[1]}\n{\"cmd\":\"step\",\"action\":[0.5]}\n";
    let mut out = Vec::new();
    saute_cli::bridge::serve_config(&cfg.environment, &cfg.saute, input.as_bytes(), &mut out).unwrap();
    let lines: Vec<Response> =
        String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].error.is_none());
    assert!(lines[2].error.as_ref().unwrap().contains("integer"));
}
