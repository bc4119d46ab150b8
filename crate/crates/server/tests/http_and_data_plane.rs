use std::io::{BufReader, Read};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use dpp_core::fixtures::FAN_ROT_ADDER;
use dpp_core::wire::{self, Frame, Reply};
use dpp_core::{program_id, Program, StreamData};
use dpp_server::{spawn, Config, ServerHandle};
use serde_json::{json, Value};

struct Http {
    agent: ureq::Agent,
    base: String,
}

impl Http {
    fn new(server: &ServerHandle) -> Http {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Http { agent, base: server.url() }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Vec<u8>) {
        let mut resp = resp.expect("request");
        let code = resp.status().as_u16();
        let mut body = Vec::new();
        resp.body_mut().as_reader().read_to_end(&mut body).unwrap();
        (code, body)
    }

    fn get(&self, path: &str) -> (u16, Vec<u8>) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    fn post(&self, path: &str, body: &[u8]) -> (u16, Vec<u8>) {
        Self::finish(self.agent.post(format!("{}{path}", self.base)).send(body))
    }

    fn delete(&self, path: &str) -> (u16, Vec<u8>) {
        Self::finish(self.agent.delete(format!("{}{path}", self.base)).call())
    }

    fn json(&self, path: &str) -> Value {
        let (code, body) = self.get(path);
        assert_eq!(code, 200, "{}", String::from_utf8_lossy(&body));
        serde_json::from_slice(&body).unwrap()
    }
}

fn parse(body: &[u8]) -> Value {
    serde_json::from_slice(body).unwrap()
}

fn upload(http: &Http, doc: &[u8]) -> String {
    let (code, body) = http.post("/v1/programs", doc);
    assert!(code == 200 || code == 201, "{code} {}", String::from_utf8_lossy(&body));
    parse(&body)["program_id"].as_str().unwrap().to_string()
}

fn create_run(http: &Http, id: &str, chunk: usize) -> (String, u16) {
    let (code, body) = http.post(&format!("/v1/programs/{id}/runs"), json!({ "chunk_size": chunk }).to_string().as_bytes());
    assert_eq!(code, 201, "{}", String::from_utf8_lossy(&body));
    let v = parse(&body);
    (v["run_id"].as_str().unwrap().to_string(), v["data_port"].as_u64().unwrap() as u16)
}

fn connect(server: &ServerHandle, port: u16, run_id: &str) -> (TcpStream, Reply) {
    let mut s = TcpStream::connect((server.addr().ip(), port)).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
    wire::write_handshake(&mut s, run_id).unwrap();
    let reply = wire::read_reply(&mut s).unwrap();
    (s, reply)
}

fn read_all_frames(s: &TcpStream) -> Vec<Frame> {
    let mut r = BufReader::new(s);
    let mut frames = Vec::new();
    while let Some(f) = wire::read_frame(&mut r).unwrap() {
        frames.push(f);
    }
    frames
}

fn wait_for_state(http: &Http, run: &str, state: &str) -> Value {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        let v = http.json(&format!("/v1/runs/{run}"));
        if v["state"] == state || Instant::now() > deadline {
            return v;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}

fn float2(values: &[f32]) -> StreamData {
    StreamData::from_f32("float2".parse().unwrap(), values.to_vec())
}

#[test]
fn upload_is_content_addressed_and_idempotent() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    assert_eq!(http.json("/v1/status")["stored_programs"], 0);
    assert!(http.json("/v1/status")["workers"].as_u64().unwrap() >= 1);

    let (code, body) = http.post("/v1/programs", FAN_ROT_ADDER.as_bytes());
    assert_eq!(code, 201);
    let id = parse(&body)["program_id"].as_str().unwrap().to_string();
    assert_eq!(id.len(), 64);
    assert!(id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()));
    let (code, again) = http.post("/v1/programs", FAN_ROT_ADDER.as_bytes());
    assert_eq!(code, 200);
    assert_eq!(parse(&again)["program_id"], id.as_str());

    let (code, doc) = http.get(&format!("/v1/programs/{id}"));
    assert_eq!(code, 200);
    assert_eq!(program_id(&dpp_core::parse_program(&doc).unwrap()), id);
    assert_eq!(http.json("/v1/status")["stored_programs"], 1);
    assert_eq!(http.get(&format!("/v1/programs/{}", "0".repeat(64))).0, 404);
}

#[test]
fn invalid_uploads_are_rejected_with_reasons() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let cyclic = r#"{"kernels":{"k":{"body":"int i=get_global_id(0);\nb[i]=a[i]+c[i];\nd[i]=a[i];","io":{
        "a":{"data":"float","type":"InputPoint"},"c":{"data":"float","type":"InputPoint"},
        "b":{"data":"float","type":"OutputPoint"},"d":{"data":"float","type":"OutputPoint"}}}},
        "nodes":[[0,{"kernel":"k"}],[1,{"kernel":"k"}]],
        "arrows":[{"output":[0,"b"],"input":[1,"a"]},{"output":[1,"b"],"input":[0,"a"]}]}"#;
    let (code, body) = http.post("/v1/programs", cyclic.as_bytes());
    assert_eq!(code, 400);
    let v = parse(&body);
    let cycle = v["violations"].as_array().unwrap().iter().find(|x| x["kind"] == "cycle").expect("cycle violation");
    assert_eq!(cycle["instances"], json!([0, 1]));

    let (code, body) = http.post("/v1/programs", b"{\"kernels\":{}}");
    assert_eq!(code, 400);
    assert!(parse(&body)["error"].is_string());
    assert_eq!(http.json("/v1/status")["stored_programs"], 0);
}

#[test]
fn fan_rot_adder_run_over_the_data_plane() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    let (run, port) = create_run(&http, &id, 3);
    let v = http.json(&format!("/v1/runs/{run}"));
    assert_eq!(v["state"], "waiting");
    assert_eq!((v["chunks_in"].as_u64(), v["chunks_out"].as_u64()), (Some(0), Some(0)));
    assert_eq!(http.json("/v1/status")["active_runs"], 1);

    let (mut s, reply) = connect(&server, port, &run);
    assert_eq!(reply, Reply::Ok(run.clone()));
    wire::write_frame(&mut s, &Frame::data("0.z", 0, &float2(&[1., 2., 3., 4., 5., 6.]))).unwrap();
    wire::write_frame(&mut s, &Frame::End { stream: "0.z".into() }).unwrap();
    let frames = read_all_frames(&s);
    let payload: Vec<u8> = [131073.0f32, 262147.0, 393221.0].iter().flat_map(|v| v.to_le_bytes()).collect();
    assert_eq!(
        frames,
        [Frame::Data { stream: "2.z".into(), chunk: 0, count: 3, payload }, Frame::End { stream: "2.z".into() }]
    );
    let v = wait_for_state(&http, &run, "done");
    assert_eq!(v["state"], "done");
    assert_eq!(v["chunks_out"], 1);
    assert_eq!(v["work_items"], 3);
    assert_eq!(http.json("/v1/status")["active_runs"], 0);
}

#[test]
fn several_chunks_and_empty_stream() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());

    let (run, port) = create_run(&http, &id, 2);
    let (mut s, _) = connect(&server, port, &run);
    let values: Vec<f32> = (0..10).map(|v| v as f32).collect();
    for (i, pair) in values.chunks(4).enumerate() {
        wire::write_frame(&mut s, &Frame::data("0.z", i as u64, &float2(pair))).unwrap();
    }
    wire::write_frame(&mut s, &Frame::End { stream: "0.z".into() }).unwrap();
    let frames = read_all_frames(&s);
    assert_eq!(frames.len(), 4);
    assert_eq!(wait_for_state(&http, &run, "done")["chunks_out"], 3);

    let (run, port) = create_run(&http, &id, 2);
    let (mut s, _) = connect(&server, port, &run);
    wire::write_frame(&mut s, &Frame::End { stream: "0.z".into() }).unwrap();
    assert_eq!(read_all_frames(&s), [Frame::End { stream: "2.z".into() }]);
    let v = wait_for_state(&http, &run, "done");
    assert_eq!((v["state"].as_str(), v["chunks_out"].as_u64()), (Some("done"), Some(0)));
}

#[test]
fn handshake_with_unknown_run_is_refused() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    let (run, port) = create_run(&http, &id, 4);
    let (s, reply) = connect(&server, port, "not-a-run");
    assert!(matches!(reply, Reply::Err(ref m) if m.contains("unknown run")), "{reply:?}");
    assert!(read_all_frames(&s).is_empty());
    // the run is still waiting for its own client
    assert_eq!(http.json(&format!("/v1/runs/{run}"))["state"], "waiting");
    let (_s, reply) = connect(&server, port, &run);
    assert_eq!(reply, Reply::Ok(run));
}

#[test]
fn protocol_and_kernel_errors_fail_the_run() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());

    let (run, port) = create_run(&http, &id, 4);
    let (mut s, _) = connect(&server, port, &run);
    wire::write_frame(&mut s, &Frame::data("0.z", 5, &float2(&[1., 2.]))).unwrap();
    let frames = read_all_frames(&s);
    assert!(matches!(&frames[..], [Frame::Error { message }] if message.contains("expected chunk 0")), "{frames:?}");
    let v = wait_for_state(&http, &run, "failed");
    assert!(v["error"].as_str().unwrap().contains("expected chunk 0"));

    let oob = r#"{"kernels":{"k":{"body":"int i=get_global_id(0);\ny[i]=x[i+1];","io":{
        "x":{"data":"float","type":"InputPoint"},"y":{"data":"float","type":"OutputPoint"}}}},
        "nodes":[[0,{"kernel":"k"}]],"arrows":[]}"#;
    let id = upload(&http, oob.as_bytes());
    let (run, port) = create_run(&http, &id, 4);
    let (mut s, _) = connect(&server, port, &run);
    let x = StreamData::from_f32(dpp_core::DataType::FLOAT, vec![0.0; 4]);
    wire::write_frame(&mut s, &Frame::data("0.x", 0, &x)).unwrap();
    wire::write_frame(&mut s, &Frame::End { stream: "0.x".into() }).unwrap();
    let frames = read_all_frames(&s);
    let Some(Frame::Error { message }) = frames.last() else { panic!("{frames:?}") };
    assert!(message.contains("chunk 0, instance 0, work-item 3"), "{message}");
    assert_eq!(wait_for_state(&http, &run, "failed")["state"], "failed");
}

#[test]
fn closing_mid_stream_fails_the_run() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    let (run, port) = create_run(&http, &id, 4);
    let (mut s, _) = connect(&server, port, &run);
    wire::write_frame(&mut s, &Frame::data("0.z", 0, &float2(&[1., 2.]))).unwrap();
    drop(s);
    let v = wait_for_state(&http, &run, "failed");
    assert_eq!(v["state"], "failed");
    assert!(v["error"].as_str().unwrap().contains("connection closed"), "{v}");
}

#[test]
fn run_limit_and_cancel() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    assert_eq!(http.post(&format!("/v1/programs/{}/runs", "f".repeat(64)), b"").0, 404);
    let runs: Vec<String> = (0..16).map(|_| create_run(&http, &id, 4).0).collect();
    let (code, body) = http.post(&format!("/v1/programs/{id}/runs"), b"");
    assert_eq!(code, 409, "{}", String::from_utf8_lossy(&body));

    let (code, body) = http.delete(&format!("/v1/runs/{}", runs[0]));
    assert_eq!(code, 200);
    assert_eq!(parse(&body)["state"], "failed");
    assert_eq!(http.get(&format!("/v1/runs/{}", runs[0])).0, 404);
    assert_eq!(http.delete(&format!("/v1/runs/{}", runs[0])).0, 404);
    assert_eq!(http.post(&format!("/v1/programs/{id}/runs"), b"").0, 201);
    assert_eq!(http.get("/v1/runs/nope").0, 404);
}

#[test]
fn bad_run_options() {
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    assert_eq!(http.post(&format!("/v1/programs/{id}/runs"), br#"{"chunk_size":0}"#).0, 400);
    assert_eq!(http.post(&format!("/v1/programs/{id}/runs"), br#"{"chunks":4}"#).0, 400);
}

#[test]
fn restarted_server_serves_stored_programs() {
    let dir = tempfile::tempdir().unwrap();
    let config = Config { store_dir: Some(dir.path().to_path_buf()), ..Config::ephemeral() };
    let id = {
        let server = spawn(config.clone()).unwrap();
        upload(&Http::new(&server), FAN_ROT_ADDER.as_bytes())
    };
    let server = spawn(config).unwrap();
    let http = Http::new(&server);
    assert_eq!(http.json("/v1/status")["stored_programs"], 1);
    let (code, doc) = http.get(&format!("/v1/programs/{id}"));
    assert_eq!(code, 200);
    assert_eq!(doc, dpp_core::serialize_program(&Program::from_json(FAN_ROT_ADDER).unwrap()));
}

#[test]
fn inline_runs() {
    use base64::Engine as _;
    let b64 = base64::engine::general_purpose::STANDARD;
    let server = spawn(Config::ephemeral()).unwrap();
    let http = Http::new(&server);
    let id = upload(&http, FAN_ROT_ADDER.as_bytes());
    let input: Vec<u8> = [1.0f32, 2., 3., 4., 5., 6.].iter().flat_map(|v| v.to_le_bytes()).collect();
    let req = json!({ "chunk_size": 2, "inputs": { "0.z": { "type": "float2", "data": b64.encode(&input) } } });
    let (code, body) = http.post(&format!("/v1/programs/{id}/runs:inline"), req.to_string().as_bytes());
    assert_eq!(code, 200, "{}", String::from_utf8_lossy(&body));
    let out = &parse(&body)["outputs"]["2.z"];
    assert_eq!(out["type"], "float");
    assert_eq!(out["count"], 3);
    let bytes = b64.decode(out["data"].as_str().unwrap()).unwrap();
    let want: Vec<u8> = [131073.0f32, 262147.0, 393221.0].iter().flat_map(|v| v.to_le_bytes()).collect();
    assert_eq!(bytes, want);

    let big = vec![0u8; (4 << 20) + 8];
    let req = json!({ "inputs": { "0.z": { "type": "float2", "data": b64.encode(&big) } } });
    assert_eq!(http.post(&format!("/v1/programs/{id}/runs:inline"), req.to_string().as_bytes()).0, 413);
    let req = json!({ "inputs": {} });
    let (code, body) = http.post(&format!("/v1/programs/{id}/runs:inline"), req.to_string().as_bytes());
    assert_eq!(code, 400);
    assert!(parse(&body)["error"].as_str().unwrap().contains("0.z"));
}
