use std::path::PathBuf;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use harmonic_gateway::server::{serve, ServeOptions};
use harmonic_gateway::Session;

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start(start_paused: bool) -> String {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/scenarios/lost_keys.scenario");
    let session = Session::load(&path, Some(42), None)
        .unwrap()
        .run_until_max_ticks();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let opts = ServeOptions {
        speed: 1.0,
        start_paused,
        trace_out: None,
    };
    tokio::spawn(serve(listener, session, opts));
    format!("ws://{addr}/ws")
}

async fn connect(url: &str) -> Ws {
    connect_async(url).await.unwrap().0
}

async fn recv(ws: &mut Ws) -> Value {
    loop {
        let m = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("timed out")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = m {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string().into())).await.unwrap();
}

/// Messages up to and including the next ack or error.
async fn until_reply(ws: &mut Ws) -> Vec<Value> {
    let mut out = Vec::new();
    loop {
        let m = recv(ws).await;
        let done = m["type"] == "ack" || m["type"] == "error";
        out.push(m);
        if done {
            return out;
        }
    }
}

#[tokio::test]
async fn first_message_is_a_snapshot() {
    let url = start(false).await;
    let mut ws = connect(&url).await;
    let first = recv(&mut ws).await;
    assert_eq!(first["type"], "snapshot");
    assert_eq!(first["scenario"], "lost_keys");
    assert_eq!(first["map"].as_array().unwrap().len(), 30);
    // A running session then streams deltas.
    let mut saw_delta = false;
    for _ in 0..50 {
        if recv(&mut ws).await["type"] == "delta" {
            saw_delta = true;
            break;
        }
    }
    assert!(saw_delta);
}

#[tokio::test]
async fn pause_then_step_gives_exactly_n_deltas() {
    let url = start(false).await;
    let mut ws = connect(&url).await;
    recv(&mut ws).await;
    send(&mut ws, json!({"type": "pause"})).await;
    let pause = until_reply(&mut ws).await;
    let ack = pause.last().unwrap();
    assert_eq!(ack["type"], "ack");
    assert_eq!(ack["request"], "pause");
    let t0 = ack["tick"].as_u64().unwrap();

    send(&mut ws, json!({"type": "step", "n": 3})).await;
    let msgs = until_reply(&mut ws).await;
    let deltas: Vec<u64> = msgs
        .iter()
        .filter(|m| m["type"] == "delta")
        .map(|m| m["tick"].as_u64().unwrap())
        .collect();
    assert_eq!(deltas, vec![t0 + 1, t0 + 2, t0 + 3]);
    assert_eq!(msgs.last().unwrap()["tick"].as_u64().unwrap(), t0 + 3);
    assert!(msgs
        .iter()
        .all(|m| ["delta", "trace_event", "ack"].contains(&m["type"].as_str().unwrap())));

    // Still paused: nothing more arrives.
    let quiet = tokio::time::timeout(Duration::from_millis(400), ws.next()).await;
    assert!(quiet.is_err(), "unexpected message while paused");
}

#[tokio::test]
async fn bad_requests_get_errors() {
    let url = start(true).await;
    let mut ws = connect(&url).await;
    recv(&mut ws).await;
    for (msg, request) in [
        (
            json!({"type": "utterance", "sender": "danny", "text": ""}),
            json!("utterance"),
        ),
        (
            json!({"type": "utterance", "sender": "mallory", "text": "Find my keys"}),
            json!("utterance"),
        ),
        (
            json!({"type": "set_speed", "speed": -1.0}),
            json!("set_speed"),
        ),
        (json!({"type": "teleport"}), Value::Null),
    ] {
        send(&mut ws, msg).await;
        let reply = recv(&mut ws).await;
        assert_eq!(reply["type"], "error", "{reply}");
        assert_eq!(reply["request"], request);
        assert!(!reply["message"].as_str().unwrap().is_empty());
    }
    send(&mut ws, json!({"type": "set_speed", "speed": 4.0})).await;
    assert_eq!(recv(&mut ws).await["type"], "ack");
}

#[tokio::test]
async fn injected_utterance_reaches_the_chat() {
    let url = start(true).await;
    let mut ws = connect(&url).await;
    recv(&mut ws).await;
    send(
        &mut ws,
        json!({"type": "utterance", "sender": "danny", "text": "Where are my keys?"}),
    )
    .await;
    assert_eq!(recv(&mut ws).await["request"], "utterance");
    send(&mut ws, json!({"type": "step", "n": 1})).await;
    let msgs = until_reply(&mut ws).await;
    let delta = msgs.iter().find(|m| m["type"] == "delta").unwrap();
    assert_eq!(delta["chat"][0]["speaker"], "danny");
    assert_eq!(delta["chat"][0]["text"], "Where are my keys?");
    let kinds: Vec<&str> = msgs
        .iter()
        .filter(|m| m["type"] == "trace_event")
        .map(|m| m["event"]["kind"].as_str().unwrap())
        .collect();
    assert_eq!(kinds, ["chat", "tmr"]);
}

#[tokio::test]
async fn separate_sessions_stream_the_same_messages() {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let url = start(true).await;
        let mut ws = connect(&url).await;
        let mut seen = vec![recv(&mut ws).await];
        send(&mut ws, json!({"type": "step", "n": 80})).await;
        seen.extend(until_reply(&mut ws).await);
        runs.push(seen);
    }
    assert!(runs[0].len() > 80);
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn clients_share_one_stream() {
    let url = start(true).await;
    let mut a = connect(&url).await;
    recv(&mut a).await;
    let mut b = connect(&url).await;
    recv(&mut b).await;
    send(&mut a, json!({"type": "step", "n": 2})).await;
    let from_a = until_reply(&mut a).await;
    // b sees the same ticks but not a's ack.
    let mut from_b = Vec::new();
    for _ in 0..from_a.len() - 1 {
        from_b.push(recv(&mut b).await);
    }
    assert_eq!(from_a[..from_a.len() - 1], from_b[..]);
    assert!(tokio::time::timeout(Duration::from_millis(300), b.next())
        .await
        .is_err());
}
