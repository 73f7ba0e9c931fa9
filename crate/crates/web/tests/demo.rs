use saute_web::{
    corridor_values, corridor_values_js, pendulum_episode, safety_trace, safety_trace_js, CorridorRequest,
    PendulumRequest, TraceRequest,
};

fn trace(costs: &[f64], budget: f64, normalize: bool) -> TraceRequest {
    TraceRequest { safety_costs: costs.to_vec(), task_costs: None, budget, gamma_l: 1.0, normalize, penalty: 50.0 }
}

#[test]
fn trace_counts_down_the_budget() {
    let t = safety_trace(&trace(&[2.0, 2.0, 3.0, 0.0], 5.0, false)).unwrap();
    assert_eq!(t.z, [5.0, 3.0, 1.0, -2.0, -2.0]);
    assert_eq!(t.emitted, [1.0, 1.0, 50.0, 50.0]);
    assert_eq!(t.first_violation, Some(2));
}

#[test]
fn spending_exactly_the_budget_is_safe() {
    let t = safety_trace(&trace(&[1.0, 3.0], 4.0, true)).unwrap();
    assert_eq!(t.z, [1.0, 0.75, 0.0]);
    assert_eq!(t.emitted, [1.0, 1.0]);
    assert_eq!(t.first_violation, None);
}

#[test]
fn trace_discounts_and_uses_task_costs() {
    let mut req = trace(&[1.0, 1.0], 2.0, false);
    req.gamma_l = 0.5;
    req.task_costs = Some(vec![0.25, 0.5]);
    let t = safety_trace(&req).unwrap();
    // (2 - 1) / 0.5 = 2, (2 - 1) / 0.5 = 2
    assert_eq!(t.z, [2.0, 2.0, 2.0]);
    assert_eq!(t.emitted, [0.25, 0.5]);
}

#[test]
fn trace_rejects_bad_input() {
    assert!(safety_trace(&trace(&[-1.0], 3.0, false)).is_err());
    assert!(safety_trace(&trace(&[f64::NAN], 3.0, false)).is_err());
    let mut req = trace(&[1.0], 3.0, false);
    req.task_costs = Some(vec![]);
    assert!(safety_trace(&req).is_err());
    req = trace(&[1.0], 3.0, false);
    req.gamma_l = 1.5;
    assert!(safety_trace(&req).is_err());
}

#[test]
fn corridor_route_depends_on_budget() {
    let tight = corridor_values(&CorridorRequest { budget: 6, penalty: 1000.0, slip: 0.0 }).unwrap();
    let loose = corridor_values(&CorridorRequest { budget: 12, penalty: 1000.0, slip: 0.0 }).unwrap();
    // two hazards cost 12, so only the loose budget affords the short cut
    assert_eq!(loose.path.len(), 6);
    assert_eq!(tight.path.len(), 10);
    assert_eq!(tight.path[0], 12);
    let goal = tight.layout.concat().find('G').unwrap();
    assert_eq!(*tight.path.last().unwrap(), goal);
    assert_eq!(*loose.path.last().unwrap(), goal);
    assert!(loose.start_value < tight.start_value);

    assert_eq!(tight.values.len(), tight.width * tight.height);
    for (cell, ch) in tight.layout.concat().chars().enumerate() {
        if ch == '#' {
            assert_eq!(tight.values[cell], None);
            assert_eq!(tight.actions[cell], None);
        }
    }
    assert_eq!(tight.values[goal], Some(0.0));
}

#[test]
fn corridor_json_wrapper_round_trips() {
    let out = corridor_values_js(r#"{"budget": 6, "penalty": 1000}"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["width"], 6);
    assert_eq!(v["path"].as_array().unwrap().len(), 10);
    let out = safety_trace_js(r#"{"safety_costs": [1, 2], "budget": 2, "normalize": false, "penalty": 9}"#).unwrap();
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["first_violation"], 1);
}

#[test]
fn pendulum_episode_tracks_the_budget() {
    let req = PendulumRequest { budget: 10.0, shaping: true, seed: 4, horizon: 40, population: 16 };
    let ep = pendulum_episode(&req).unwrap();
    assert_eq!(ep.theta_deg.len(), 40);
    assert_eq!(ep.z.len(), 40);
    let mut spent = 0.0;
    for (t, (&z, &l)) in ep.z.iter().zip(&ep.safety_cost).enumerate() {
        spent += l;
        assert!((z - (1.0 - spent / req.budget)).abs() < 1e-9, "z at step {t}");
    }
    assert!((ep.total_safety - spent).abs() < 1e-9);
    assert_eq!(ep.violated, spent > req.budget);
    assert!(ep.theta_deg.iter().all(|a| (-180.0..=180.0).contains(a)));

    let again = pendulum_episode(&req).unwrap();
    assert_eq!(serde_json::to_string(&again.reward).unwrap(), serde_json::to_string(&ep.reward).unwrap());
}
