use std::path::Path;
use std::time::Duration;

use ecsim_core::gateway::ScenarioConfig;
use serde_json::{json, Value};
use simctl::live::{self, LiveHandle};

fn scenario(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    ScenarioConfig::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

struct Server {
    base: String,
    client: reqwest::Client,
    handle: LiveHandle,
}

impl Server {
    async fn start(cfg: &ScenarioConfig, pace: f64) -> Server {
        let handle = live::start(cfg, pace, None).unwrap();
        let app = simctl::api::router(handle.shared.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        Server {
            base: format!("http://{addr}"),
            client: reqwest::Client::new(),
            handle,
        }
    }

    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.client.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn post(&self, body: &str) -> (u16, Value) {
        let r = self
            .client
            .post(format!("{}/api/recommendations", self.base))
            .body(body.to_string())
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn feed(&self) -> Feed {
        let resp = self.client.get(format!("{}/api/stream", self.base)).send().await.unwrap();
        assert_eq!(resp.status(), 200);
        Feed {
            resp,
            buf: String::new(),
        }
    }

    fn stop(self) {
        self.handle.stop();
        self.handle.join().unwrap();
    }
}

struct Feed {
    resp: reqwest::Response,
    buf: String,
}

impl Feed {
    /// Next `(event name, data)` from the stream.
    async fn next(&mut self) -> (String, Value) {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let mut name = None;
                let mut data = None;
                for line in block.lines() {
                    if let Some(v) = line.strip_prefix("event: ") {
                        name = Some(v.to_string());
                    } else if let Some(v) = line.strip_prefix("data: ") {
                        data = Some(serde_json::from_str(v).unwrap());
                    }
                }
                if let (Some(n), Some(d)) = (name, data) {
                    return (n, d);
                }
                continue;
            }
            let chunk = self.resp.chunk().await.unwrap().expect("stream ended");
            self.buf.push_str(std::str::from_utf8(&chunk).unwrap());
        }
    }

    async fn until(&mut self, mut pred: impl FnMut(&str, &Value) -> bool) -> Value {
        tokio::time::timeout(Duration::from_secs(60), async {
            loop {
                let (name, data) = self.next().await;
                if pred(&name, &data) {
                    return data;
                }
            }
        })
        .await
        .expect("stream event did not arrive")
    }
}

fn stage_change(patient: &str, target: &str) -> String {
    json!({"expert_id": "dr-a", "issued_at": 0, "kind": "TherapyStageChange",
           "patient_id": patient, "payload": {"target": target}})
    .to_string()
}

fn ack(patient: &str, alert: &str) -> String {
    json!({"expert_id": "dr-a", "issued_at": 0, "kind": "EmergencyAck",
           "patient_id": patient, "payload": {"alert_id": alert}})
    .to_string()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn fresh_run_lists_every_patient_at_low_risk() {
    let server = Server::start(&scenario("reference.json"), 1.0).await;
    let (status, patients) = server.get("/api/patients").await;
    assert_eq!(status, 200);
    let rows = patients.as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|p| p["patient_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["p1", "p2", "p3"]);
    assert!(rows.iter().all(|p| p["risk"]["level"] == "Low"));
    let (status, alerts) = server.get("/api/alerts").await;
    assert_eq!((status, alerts), (200, json!([])));
    server.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_recommendations_get_the_right_status() {
    let server = Server::start(&scenario("reference.json"), 1.0).await;
    let (status, body) = server.post(&ack("p1", "sensor:p1:SpO2#999")).await;
    assert_eq!(status, 409, "{body}");
    assert_eq!(body["status"], "rejected");

    let (status, _) = server.post(&stage_change("p9", "Basic")).await;
    assert_eq!(status, 404);

    let (status, body) = server.post(&stage_change("p1", "Basic").replace("dr-a", "")).await;
    assert_eq!(status, 400);
    assert_eq!(body["violations"][0]["field"], "expert_id");

    let (status, _) = server.post(r#"{"kind": "TherapyStageChange"}"#).await;
    assert_eq!(status, 400);
    let (status, _) = server.post(&stage_change("p1", "Expert")).await;
    assert_eq!(status, 400);
    server.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn stage_change_shows_up_as_a_new_tree_on_the_stream() {
    let server = Server::start(&scenario("reference.json"), 50.0).await;
    let mut feed = server.feed().await;
    let (status, body) = server.post(&stage_change("p1", "Middle")).await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["status"], "applied");
    let changed = feed
        .until(|n, d| n == "stage_changed" && d["patient_id"] == "p1")
        .await;
    assert_eq!(changed["to"], "Middle");
    let started = feed
        .until(|n, d| n == "session_started" && d["patient_id"] == "p1")
        .await;
    assert_eq!(started["tree_id"], "middle_knockknock");
    let (_, patients) = server.get("/api/patients").await;
    assert_eq!(patients[0]["stage"], "Middle");
    server.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn acknowledging_an_alert_clears_it_and_drops_risk() {
    let mut cfg = scenario("reference.json");
    // Long enough that the human, not the fallback, acknowledges.
    cfg.expert.live_ack_timeout_ms = 300_000;
    let server = Server::start(&cfg, 50.0).await;
    let mut feed = server.feed().await;
    let raised = feed.until(|n, _| n == "alert_raised").await;
    let alert_id = raised["alert"]["alert_id"].as_str().unwrap().to_string();
    feed.until(|n, d| n == "risk_changed" && d["assessment"]["level"] == "Critical")
        .await;
    let (_, alerts) = server.get("/api/alerts").await;
    assert_eq!(alerts[0]["alert_id"], alert_id.as_str());

    let (status, body) = server.post(&ack("p1", &alert_id)).await;
    assert_eq!(status, 200, "{body}");
    feed.until(|n, d| n == "alert_cleared" && d["alert_id"] == alert_id.as_str())
        .await;
    let drop = feed
        .until(|n, d| n == "risk_changed" && d["assessment"]["patient_id"] == "p1")
        .await;
    assert_eq!(drop["previous"], "Critical");
    assert_ne!(drop["assessment"]["level"], "Critical");
    let (_, alerts) = server.get("/api/alerts").await;
    assert_eq!(alerts, json!([]));
    let (status, _) = server.post(&ack("p1", &alert_id)).await;
    assert_eq!(status, 409);
    server.stop();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn telemetry_and_metrics_endpoints() {
    let server = Server::start(&scenario("reference.json"), 50.0).await;
    let mut feed = server.feed().await;
    feed.until(|n, d| n == "session_closed" && d["t"].as_u64().unwrap() >= 40_000)
        .await;
    let (status, all) = server.get("/api/patients/p2/telemetry?window=600000").await;
    assert_eq!(status, 200);
    let all = all.as_array().unwrap().clone();
    assert!(all.len() >= 4);
    assert!(all.iter().all(|r| r["patient_id"] == "p2"));
    let (_, recent) = server.get("/api/patients/p2/telemetry?window=10000").await;
    assert!(recent.as_array().unwrap().len() <= 1);
    let (status, _) = server.get("/api/patients/nobody/telemetry").await;
    assert_eq!(status, 404);
    let (status, metrics) = server.get("/api/metrics").await;
    assert_eq!(status, 200);
    assert!(metrics["global"]["events"].as_u64().unwrap() > 0);
    assert!(metrics["patients"]["p1"]["qoe"].is_number());
    server.stop();
}
