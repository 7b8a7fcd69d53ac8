use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sgkit::config::Config;
use sgkit::service::{handle_line, serve_stream, ServiceState};
use sgkit_core::codec::{serialize_json, serialize_toon};
use sgkit_core::graph::BoundingBox;
use sgkit_core::reward::score_batch;
use sgkit_core::{Relation, SceneGraph, Schema};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::sync::{watch, Semaphore};

const LABELS: [&str; 4] = ["person", "dog", "car", "tree"];
const PREDICATES: [&str; 3] = ["on", "near", "holding"];

fn random_graph(rng: &mut ChaCha8Rng) -> SceneGraph {
    let mut g = SceneGraph::new(Schema::ObjectRelation);
    for _ in 0..rng.random_range(1..=6) {
        let (x, y) = (
            rng.random_range(0.0..500.0f64).round(),
            rng.random_range(0.0..380.0f64).round(),
        );
        let (w, h) = (
            rng.random_range(5.0..140.0f64).round(),
            rng.random_range(5.0..100.0f64).round(),
        );
        g.push_object(
            LABELS[rng.random_range(0..LABELS.len())],
            BoundingBox::from_f64([x, y, x + w, y + h]),
        );
    }
    let n = g.objects.len();
    for _ in 0..rng.random_range(0..=6) {
        let (s, o) = (rng.random_range(0..n), rng.random_range(0..n));
        let p = PREDICATES[rng.random_range(0..PREDICATES.len())];
        if s != o
            && !g
                .relations
                .iter()
                .any(|r| r.subject_id == s && r.object_id == o && r.predicate == p)
        {
            g.relations.push(Relation::new(s, p, o));
        }
    }
    g
}

fn corpus(n: usize) -> Vec<(SceneGraph, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..n)
        .map(|i| {
            let gt = random_graph(&mut rng);
            let completion = match i % 5 {
                0 => "no tags here".to_string(),
                1 => format!("<answer>{}</answer>", serialize_toon(&gt).unwrap().raw_text),
                _ => format!(
                    "<answer>{}</answer>",
                    serialize_toon(&random_graph(&mut rng)).unwrap().raw_text
                ),
            };
            (gt, completion)
        })
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn pipelined_session_matches_offline_batch() {
    let config = Config::default();
    let items = corpus(1000);
    let mut payload = String::new();
    for (i, (gt, c)) in items.iter().enumerate() {
        let gt: Value = serde_json::from_str(&serialize_json(gt).unwrap()).unwrap();
        payload.push_str(
            &json!({"id": format!("r{i}"), "ground_truth": gt, "completion": c}).to_string(),
        );
        payload.push('\n');
    }

    let (client, server) = tokio::io::duplex(1 << 16);
    let (r, w) = tokio::io::split(server);
    let (_stop, rx) = watch::channel(false);
    let state = Arc::new(ServiceState::from_config(&config));
    let server = tokio::spawn(serve_stream(r, w, state, Arc::new(Semaphore::new(4)), rx));
    let (mut cr, mut cw) = tokio::io::split(client);
    let send = tokio::spawn(async move {
        cw.write_all(payload.as_bytes()).await.unwrap();
        cw.shutdown().await.unwrap();
    });
    let mut responses = String::new();
    cr.read_to_string(&mut responses).await.unwrap();
    send.await.unwrap();
    assert_eq!(server.await.unwrap().unwrap().requests, 1000);

    let pairs: Vec<_> = items.iter().map(|(g, c)| (g, c.as_str())).collect();
    let offline = score_batch(&pairs, &config.weights, &config.matching);
    let mut seen = vec![false; items.len()];
    for line in responses.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["version"], 1);
        let i: usize = v["id"].as_str().unwrap()[1..].parse().unwrap();
        assert!(!seen[i], "duplicate response for r{i}");
        seen[i] = true;
        let expected = offline[i].as_ref().unwrap().total;
        assert_eq!(
            v["total"].as_f64().unwrap().to_bits(),
            expected.to_bits(),
            "r{i}"
        );
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn fuzzed_request_lines_always_get_one_response() {
    let state = ServiceState::from_config(&Config::default());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seeds = [
        r#"{"id":"a","ground_truth_toon":"objects[1]{id,label,x1,y1,x2,y2}:\n0,a,0,0,5,5\nrelations[0]{subject,predicate,object}:\n","completion":"<answer></answer>"}"#,
        r#"{"id":"b","ground_truth":{"objects":[],"relations":[]},"completion":"x","weights":{"format":2}}"#,
    ];
    for _ in 0..20_000 {
        let mut bytes = seeds[rng.random_range(0..seeds.len())].as_bytes().to_vec();
        for _ in 0..rng.random_range(1..6) {
            let at = rng.random_range(0..bytes.len());
            match rng.random_range(0..3) {
                0 => bytes[at] = rng.random(),
                1 => {
                    bytes.remove(at);
                }
                _ => bytes.insert(at, b"{}[]\",:\\0-e"[rng.random_range(0..11)]),
            }
            if bytes.is_empty() {
                break;
            }
        }
        let line = String::from_utf8_lossy(&bytes);
        let resp: Value = serde_json::from_str(&handle_line(&line, &state)).unwrap();
        assert_eq!(resp["version"], 1);
        assert!(resp.get("total").is_some() || resp.get("error").is_some());
    }
}
