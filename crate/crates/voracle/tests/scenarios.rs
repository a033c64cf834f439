//! End-to-end runs of the bundled scenarios: the happy path, adversarial
//! mixes, fork inconsistency with retry, liveness under aggregator failure,
//! and event-log replay after a restart.

use std::path::PathBuf;
use voracle::contracts::encode_result_payload;
use voracle::nodes::{Behavior, LazyAnswer};
use voracle::scenario::{FaultSpec, Scenario};
use voracle::simulator::{self, Metrics, RunOutput};
use voracle::NodeId;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run_bundled(name: &str) -> RunOutput {
    let scenario = Scenario::load(&scenario_path(name)).expect("scenario loads");
    simulator::run(&scenario).expect("scenario runs")
}

fn all_fulfilled(metrics: &Metrics) -> bool {
    !metrics.requests.is_empty() && metrics.requests.iter().all(|r| r.fulfilled_at.is_some())
}

#[test]
fn baseline_serves_every_request_within_two_blocks() {
    let output = run_bundled("baseline.toml");
    let metrics = &output.metrics;
    assert_eq!(metrics.requests.len(), 3);
    assert!(all_fulfilled(metrics));
    for request in &metrics.requests {
        assert!(request.latency_blocks.unwrap() <= 2, "request {request:?}");
        assert_eq!(request.matches_canonical, Some(true));
    }
    assert_eq!(metrics.keys_activated, 1);
    assert!(metrics.conservation_ok);
}

#[test]
fn lazy_minority_cannot_outvote_honest_majority() {
    let output = run_bundled("lazy_minority.toml");
    let metrics = &output.metrics;
    assert!(all_fulfilled(metrics));
    for request in &metrics.requests {
        assert_eq!(request.matches_canonical, Some(true));
    }
}

#[test]
fn lazy_majority_decides_alone_with_a_verifying_wrong_result() {
    let output = run_bundled("lazy_majority.toml");
    let metrics = &output.metrics;
    assert!(all_fulfilled(metrics));
    let request = &metrics.requests[0];
    // stored implies the pairing check passed; yet the payload is the lazy
    // constant, not the canonical answer
    assert_eq!(request.matches_canonical, Some(false));
    let lazy_payload = encode_result_payload(
        request.request_id,
        &LazyAnswer::default().to_verification_answer(),
    );
    assert_eq!(
        request.payload_hex.as_deref(),
        Some(hex::encode(lazy_payload).as_str())
    );
}

#[test]
fn next_aggregator_takes_over_from_offline_one() {
    let output = run_bundled("aggregator_offline.toml");
    let metrics = &output.metrics;
    let request = &metrics.requests[0];
    let latency = request
        .latency_blocks
        .expect("fulfilled despite offline aggregator");
    assert!(
        latency <= 12,
        "latency {latency} exceeds two rotation windows"
    );
    // the offline node earned nothing for this request
    let offline = metrics
        .nodes
        .iter()
        .find(|n| n.id.as_str() == "n5")
        .unwrap();
    assert_eq!(offline.submissions_accepted, 0);
    assert_eq!(request.matches_canonical, Some(true));
}

#[test]
fn fork_blocks_aggregation_until_heal() {
    let scenario = Scenario::load(&scenario_path("fork_heal.toml")).unwrap();
    let heal_tick = 32;
    let output = simulator::run(&scenario).unwrap();
    let request = &output.metrics.requests[0];
    let fulfilled_at = request.fulfilled_at.expect("eventually fulfilled");
    assert!(
        fulfilled_at > heal_tick,
        "no three views agree before the heal (fulfilled at {fulfilled_at})"
    );
    assert_eq!(request.matches_canonical, Some(true));
}

#[test]
fn withholding_majority_starves_the_validation_pot() {
    let baseline = run_bundled("baseline.toml");
    assert!(
        baseline.metrics.validation_pot
            + baseline
                .metrics
                .nodes
                .iter()
                .map(|n| n.lottery_winnings)
                .sum::<u64>()
            > 0
    );

    // two free-loaders leave exactly t honest validators: still fully live
    let marginal = run_bundled("withholders.toml");
    assert!(all_fulfilled(&marginal.metrics));

    // a third withholder pushes honest answers below the threshold: nothing
    // is fulfilled and no validation reward ever accrues
    let mut scenario = Scenario::load(&scenario_path("withholders.toml")).unwrap();
    scenario.nodes[2].behavior = Behavior::RationalWithholder;
    let starved = simulator::run(&scenario).unwrap();
    assert!(starved
        .metrics
        .requests
        .iter()
        .all(|r| r.fulfilled_at.is_none()));
    assert_eq!(starved.metrics.validation_pot, 0);
    assert_eq!(starved.metrics.costs.oracle_submissions, 0);
}

#[test]
fn restarted_node_catches_up_from_the_event_log() {
    let mut scenario = Scenario::load(&scenario_path("baseline.toml")).unwrap();
    // n2 sleeps through the first request entirely and comes back before the
    // third; height 37's aggregation lands in n2's rotation slot
    scenario.nodes[1].behavior = Behavior::Offline {
        from: 22,
        until: 30,
    };
    let output = simulator::run(&scenario).unwrap();
    let metrics = &output.metrics;
    assert!(all_fulfilled(metrics));
    let n2 = metrics
        .nodes
        .iter()
        .find(|n| n.id.as_str() == "n2")
        .unwrap();
    assert_eq!(
        n2.submissions_accepted, 1,
        "restarted node should aggregate the request it is scheduled for"
    );
    for request in &metrics.requests {
        assert_eq!(request.matches_canonical, Some(true));
    }
}

#[test]
fn dropped_submission_is_retried_next_block() {
    let mut scenario = Scenario::load(&scenario_path("baseline.toml")).unwrap();
    // request 1 arrives at height 25; its aggregator submits at tick 26.
    // Drop that transaction once and the same aggregator retries at 27.
    scenario.faults.push(FaultSpec {
        at_tick: 26,
        drop_tx_from: NodeId::new("n5"),
    });
    let output = simulator::run(&scenario).unwrap();
    let request = &output.metrics.requests[0];
    assert_eq!(request.fulfilled_at, Some(28));
    assert_eq!(request.matches_canonical, Some(true));
}

#[test]
fn dealer_offline_through_dkg_is_not_qualified() {
    let mut scenario = Scenario::load(&scenario_path("baseline.toml")).unwrap();
    // n3 sleeps through the whole dealing window: its deal never reaches the
    // broadcast channel, so every other node computes a 4-dealer qualified
    // set, and n3 itself ends up without a key share
    scenario.nodes[2].behavior = Behavior::Offline { from: 0, until: 10 };
    let output = simulator::run(&scenario).unwrap();
    let metrics = &output.metrics;
    assert_eq!(metrics.keys_activated, 1);
    assert!(all_fulfilled(metrics), "four key holders still clear t = 3");
    let final_line = output
        .dkg_transcript
        .lines()
        .find(|l| l.contains("\"type\":\"final\""))
        .expect("final dkg record");
    let record: serde_json::Value = serde_json::from_str(final_line).unwrap();
    let qualified: Vec<&str> = record["qualified"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(qualified, vec!["n1", "n2", "n4", "n5"]);
}

#[test]
fn byzantine_minority_never_corrupts_results() {
    // adversarial matrix: any mix of byzantine/lazy below the threshold
    // leaves every stored result canonical, across seeds
    let base = Scenario::load(&scenario_path("baseline.toml")).unwrap();
    let adversarial: [&[(usize, Behavior)]; 3] = [
        &[(
            3,
            Behavior::Byzantine {
                mode: voracle::nodes::ByzantineMode::RandomPoint,
            },
        )],
        &[(
            3,
            Behavior::Byzantine {
                mode: voracle::nodes::ByzantineMode::WrongPayload,
            },
        )],
        &[
            (
                3,
                Behavior::Byzantine {
                    mode: voracle::nodes::ByzantineMode::Withhold,
                },
            ),
            (
                4,
                Behavior::Lazy {
                    answer: LazyAnswer::default(),
                },
            ),
        ],
    ];
    for (case, assignments) in adversarial.iter().enumerate() {
        for seed in [1u64, 2, 3] {
            let mut scenario = base.clone();
            scenario.seed = seed;
            for (index, behavior) in assignments.iter() {
                scenario.nodes[*index].behavior = *behavior;
            }
            let output = simulator::run(&scenario).unwrap();
            assert!(
                all_fulfilled(&output.metrics),
                "case {case} seed {seed} failed to fulfill"
            );
            for request in &output.metrics.requests {
                assert_eq!(
                    request.matches_canonical,
                    Some(true),
                    "case {case} seed {seed} stored a non-canonical result"
                );
            }
        }
    }
}
