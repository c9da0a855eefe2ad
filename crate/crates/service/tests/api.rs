use std::sync::{Arc, OnceLock};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

use posemap_core::avatar::{write_synthetic_avatar, AvatarAssets, PredictorConfig, PredictorKind, SyntheticAvatarOptions};
use posemap_core::{ActionLabel, Vec3};
use posemap_service::{frame_message, router, FrameMessage, PayloadKind, Registry, ServiceConfig, SessionInfo};

fn avatar() -> AvatarAssets {
    static CELL: OnceLock<(tempfile::TempDir, AvatarAssets)> = OnceLock::new();
    let (_, a) = CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let opts = SyntheticAvatarOptions { with_basis: false, ..Default::default() };
        let path = write_synthetic_avatar(dir.path().join("humanoid"), &opts).unwrap();
        let a = AvatarAssets::load(&path).unwrap();
        (dir, a)
    });
    a.clone()
}

fn registry() -> Arc<Registry> {
    Arc::new(Registry::new(ServiceConfig::default(), vec![avatar()]))
}

async fn call(reg: &Arc<Registry>, method: &str, uri: &str, body: Option<serde_json::Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = router(reg.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn create(reg: &Arc<Registry>, body: serde_json::Value) -> SessionInfo {
    let (status, bytes) = call(reg, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn step(reg: &Arc<Registry>, id: &str, a: &str) -> FrameMessage {
    let (status, bytes) = call(reg, "POST", &format!("/sessions/{id}/step"), Some(serde_json::json!({ "a": a }))).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    FrameMessage::decode(&bytes).unwrap()
}

#[tokio::test]
async fn create_describe_and_unknown_avatar() {
    let reg = registry();
    let a = create(&reg, serde_json::json!({ "avatar": "humanoid" })).await;
    let b = create(&reg, serde_json::json!({ "avatar": "humanoid", "payload": "splats" })).await;
    assert_ne!(a.id, b.id);
    assert_eq!(a.round, 0);
    assert_eq!(b.payload, PayloadKind::Splats);
    let (status, bytes) = call(&reg, "GET", &format!("/sessions/{}", a.id), None).await;
    assert_eq!(status, StatusCode::OK);
    let info: SessionInfo = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(info.avatar, "humanoid");
    let (status, bytes) = call(&reg, "POST", "/sessions", Some(serde_json::json!({ "avatar": "nobody" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(String::from_utf8_lossy(&bytes).contains("unknown_avatar"));
    let (status, _) = call(&reg, "GET", "/sessions/s-999-00000000", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn assets_are_listed() {
    let reg = registry();
    let (status, bytes) = call(&reg, "GET", "/assets", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["avatars"][0]["id"], "humanoid");
    let (status, bytes) = call(&reg, "GET", "/assets/humanoid/manifest.json", None).await;
    assert_eq!(status, StatusCode::OK);
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["resolution"], 128);
    let (status, _) = call(&reg, "GET", "/assets/other/manifest.json", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn idle_holds_and_forward_travels() {
    let reg = registry();
    let s = create(&reg, serde_json::json!({ "avatar": "humanoid", "origin": [1.0, 0.0, -2.0] })).await;
    let f = step(&reg, &s.id, "0").await;
    assert_eq!(f.round, 1);
    assert_eq!(f.action, ActionLabel::Idle);
    assert!((Vec3::from(f.world_root) - Vec3::new(1.0, 0.0, -2.0)).amax() < 1e-12, "{:?}", f.world_root);
    assert_eq!(f.kind, PayloadKind::Points);
    assert_eq!(f.point_count(), avatar().standing.foreground_count());

    let speed = avatar().manifest.kinematic.speed;
    let mut last = f;
    for _ in 0..60 {
        last = step(&reg, &s.id, "W").await;
    }
    assert_eq!(last.round, 61);
    let d = Vec3::from(last.world_root) - Vec3::new(1.0, 0.0, -2.0);
    assert!((d - Vec3::new(0.0, 0.0, 60.0 * speed)).amax() < 1e-6, "{d:?}");
}

#[tokio::test]
async fn closed_and_expired_sessions_are_gone() {
    let reg = registry();
    let s = create(&reg, serde_json::json!({ "avatar": "humanoid" })).await;
    let (status, _) = call(&reg, "DELETE", &format!("/sessions/{}", s.id), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, bytes) = call(&reg, "POST", &format!("/sessions/{}/step", s.id), Some(serde_json::json!({ "a": "W" }))).await;
    assert_eq!(status, StatusCode::GONE);
    assert!(String::from_utf8_lossy(&bytes).contains("session_gone"));

    let t = create(&reg, serde_json::json!({ "avatar": "humanoid" })).await;
    tokio::time::sleep(Duration::from_millis(30)).await;
    assert_eq!(reg.expire_idle(Duration::from_millis(10)), vec![t.id.clone()]);
    let (status, _) = call(&reg, "GET", &format!("/sessions/{}", t.id), None).await;
    assert_eq!(status, StatusCode::GONE);
}

#[tokio::test]
async fn malformed_requests_are_rejected() {
    let reg = registry();
    let s = create(&reg, serde_json::json!({ "avatar": "humanoid" })).await;
    let (status, _) = call(&reg, "POST", &format!("/sessions/{}/step", s.id), Some(serde_json::json!({ "a": "Q" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&reg, "POST", "/sessions", Some(serde_json::json!({ "avatar": "humanoid", "extra": 1 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let info: SessionInfo = serde_json::from_slice(&call(&reg, "GET", &format!("/sessions/{}", s.id), None).await.1).unwrap();
    assert_eq!(info.round, 0);
}

#[tokio::test]
async fn splat_payload_matches_point_count() {
    let reg = registry();
    let s = create(&reg, serde_json::json!({ "avatar": "humanoid", "payload": "splats" })).await;
    let f = step(&reg, &s.id, "W").await;
    assert_eq!(f.kind, PayloadKind::Splats);
    let up = avatar().manifest.upscale_factor;
    assert!(f.point_count() > avatar().standing.foreground_count() * up);
    assert!(f.payload.iter().all(|v| v.is_finite()));
}

#[tokio::test]
async fn parallel_sessions_match_sequential_runs() {
    let reg = registry();
    let scripts = ["20W,10A,15S,5I,10D", "30D,10W,20I"];
    let expand = |s: &str| posemap_core::rollout::expand_script(&posemap_core::rollout::parse_script(s).unwrap(), 1);
    let configs = [
        PredictorConfig::default(),
        PredictorConfig { predictor: PredictorKind::Ddim, ..Default::default() },
    ];

    let mut expected = Vec::new();
    for (script, cfg) in scripts.iter().zip(&configs) {
        let a = avatar();
        let mut session = a.new_session(cfg, Vec3::zeros()).unwrap();
        let frames: Vec<Vec<u8>> = expand(script)
            .into_iter()
            .map(|act| frame_message(&session.step(act).unwrap(), &a, PayloadKind::Points, 0).unwrap().encode())
            .collect();
        expected.push(frames);
    }

    let mut tasks = Vec::new();
    for (script, cfg) in scripts.iter().zip(configs) {
        let reg = reg.clone();
        let actions = expand(script);
        tasks.push(tokio::spawn(async move {
            let s = create(&reg, serde_json::json!({ "avatar": "humanoid", "predictor": cfg })).await;
            let mut out = Vec::new();
            for a in actions {
                out.push(step(&reg, &s.id, &a.to_string()).await.encode());
            }
            out
        }));
    }
    for (task, want) in tasks.into_iter().zip(expected) {
        assert!(task.await.unwrap() == want);
    }
}

async fn serve(reg: Arc<Registry>) -> std::net::SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(reg)).await.unwrap() });
    addr
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_frame(ws: &mut Ws) -> FrameMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.expect("frame timeout").unwrap().unwrap();
        match msg {
            Message::Binary(b) => return FrameMessage::decode(&b).unwrap(),
            Message::Text(t) => panic!("server reported {t}"),
            _ => {}
        }
    }
}

async fn send(ws: &mut Ws, a: &str) {
    ws.send(Message::Text(format!(r#"{{"a":"{a}"}}"#).into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn stream_steps_one_to_one_when_slow() {
    let reg = registry();
    let addr = serve(reg.clone()).await;
    let id = reg.create(&posemap_service::CreateSession { avatar: "humanoid".into(), ..Default::default() }).unwrap().id().to_string();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap();
    let mut rounds = Vec::new();
    for a in ["W", "W", "S"] {
        send(&mut ws, a).await;
        let f = next_frame(&mut ws).await;
        assert_eq!(f.action.to_string(), a);
        rounds.push(f.round);
    }
    assert_eq!(rounds, vec![1, 2, 3]);
    ws.send(Message::Text("not json".into())).await.unwrap();
    let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.unwrap().unwrap().unwrap();
    assert!(msg.into_text().unwrap().contains("bad_request"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn burst_is_coalesced_and_disconnect_keeps_session() {
    let reg = registry();
    let addr = serve(reg.clone()).await;
    let req = posemap_service::CreateSession { avatar: "humanoid".into(), payload: Some(PayloadKind::Splats), ..Default::default() };
    let id = reg.create(&req).unwrap().id().to_string();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap();
    for _ in 0..100 {
        ws.feed(Message::Text(r#"{"a":"W"}"#.into())).await.unwrap();
    }
    ws.flush().await.unwrap();
    let mut steps = 0u32;
    let mut last_round = 0;
    loop {
        let f = next_frame(&mut ws).await;
        steps += 1;
        assert_eq!(f.round, last_round + 1);
        last_round = f.round;
        if steps + f.dropped == 100 {
            break;
        }
        assert!(steps + f.dropped < 100);
    }
    assert!((1..=100).contains(&steps));
    println!("burst of 100: {steps} steps, {} dropped", 100 - steps);

    send(&mut ws, "A").await;
    drop(ws);
    tokio::time::sleep(Duration::from_millis(200)).await;
    let entry = reg.get(&id).unwrap();
    let round = entry.info().round;
    assert!(round == last_round as u64 || round == last_round as u64 + 1);
    let f = tokio::task::spawn_blocking(move || entry.step(ActionLabel::Idle)).await.unwrap().unwrap();
    assert_eq!(f.round as u64, round + 1);
}
