use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use tower::ServiceExt;

use seeded_laplacian::eval::{confusion, jaccard};
use seeded_laplacian::image::{ImageRgb, Mask};
use seeded_laplacian::segment::{SegmenterParams, SessionState};
use seeded_laplacian::synth::{generate, SynthConfig, SynthSample};
use seeded_laplacian_service::*;

fn app() -> (Arc<AppState>, Router) {
    let state = Arc::new(AppState::default());
    (state.clone(), router(state, None))
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Bytes) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes())
}

fn post_bytes(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header(header::CONTENT_TYPE, "image/png")
        .body(Body::from(body))
        .unwrap()
}

fn post_json(uri: &str, body: &serde_json::Value) -> Request<Body> {
    Request::builder()
        .method(Method::POST)
        .uri(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::builder().uri(uri).body(Body::empty()).unwrap()
}

fn sample(seed: u64) -> SynthSample {
    generate(&SynthConfig::default(), seed)
}

async fn create(app: &Router, image: &ImageRgb) -> String {
    let (status, body) = send(app, post_bytes("/sessions", image.encode_png())).await;
    assert_eq!(status, StatusCode::CREATED);
    let c: Created = serde_json::from_slice(&body).unwrap();
    assert_eq!((c.width, c.height), image.dims());
    c.id
}

fn centroid(gt: &Mask) -> (f64, f64) {
    let (w, _) = gt.dims();
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (i, _) in gt.data().iter().enumerate().filter(|(_, &v)| v) {
        sx += (i % w) as f64;
        sy += (i / w) as f64;
        n += 1.0;
    }
    (sx / n, sy / n)
}

/// One foreground dash through the object and one background stroke
/// traced around the frame.
fn first_strokes(s: &SynthSample) -> Vec<Stroke> {
    let (w, h) = s.image.dims();
    let (cx, cy) = centroid(&s.ground_truth);
    let (r, b) = ((w - 4) as f64, (h - 4) as f64);
    vec![
        Stroke {
            label: StrokeLabel::Fg,
            points: vec![[cx - 6.0, cy], [cx + 6.0, cy]],
            radius: 3,
        },
        Stroke {
            label: StrokeLabel::Bg,
            points: vec![[3.0, 3.0], [r, 3.0], [r, b], [3.0, b], [3.0, 3.0]],
            radius: 2,
        },
    ]
}

/// A second round: a vertical foreground dash and a bottom background line.
fn second_strokes(s: &SynthSample) -> Vec<Stroke> {
    let (w, h) = s.image.dims();
    let (cx, cy) = centroid(&s.ground_truth);
    vec![
        Stroke {
            label: StrokeLabel::Fg,
            points: vec![[cx, cy - 4.0], [cx, cy + 4.0]],
            radius: 2,
        },
        Stroke {
            label: StrokeLabel::Bg,
            points: vec![[3.0, (h - 4) as f64], [(w - 4) as f64, (h - 4) as f64]],
            radius: 2,
        },
    ]
}

fn payload(strokes: &[Stroke]) -> serde_json::Value {
    serde_json::to_value(StrokePayload {
        strokes: strokes.to_vec(),
        params: None,
    })
    .unwrap()
}

async fn post_strokes(app: &Router, id: &str, mode: &str, strokes: &[Stroke]) -> (StatusCode, Bytes) {
    send(app, post_json(&format!("/sessions/{id}/strokes?mode={mode}"), &payload(strokes))).await
}

async fn mask_of(app: &Router, id: &str) -> Mask {
    let (status, body) = send(app, get(&format!("/sessions/{id}/mask.png"))).await;
    assert_eq!(status, StatusCode::OK);
    Mask::decode_png(&body).unwrap()
}

fn ji(a: &Mask, b: &Mask) -> f64 {
    jaccard(&confusion(a, b).unwrap())
}

fn error_of(body: &[u8]) -> String {
    let v: serde_json::Value = serde_json::from_slice(body).unwrap();
    v["error"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn healthz_answers() {
    let (_, app) = app();
    let (status, body) = send(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    assert!(String::from_utf8_lossy(&body).contains("ok"));
}

#[tokio::test]
async fn uploads_get_distinct_ids() {
    let (state, app) = app();
    let s = sample(1);
    let a = create(&app, &s.image).await;
    let b = create(&app, &s.image).await;
    assert_ne!(a, b);
    assert_eq!(state.store.len(), 2);
}

#[tokio::test]
async fn truncated_upload_is_rejected() {
    let (state, app) = app();
    let mut png = sample(1).image.encode_png();
    png.truncate(png.len() / 2);
    let (status, body) = send(&app, post_bytes("/sessions", png)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(error_of(&body).contains("decode"));
    let (status, _) = send(&app, post_bytes("/sessions", b"not a png".to_vec())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(state.store.is_empty());
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let (_, app) = app();
    let (status, _) = send(&app, post_bytes("/sessions", vec![0u8; MAX_UPLOAD_BYTES + 1])).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let (_, app) = app();
    let s = sample(2);
    let (status, _) = post_strokes(&app, "missing", "append", &first_strokes(&s)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    for path in ["mask.png", "overlay.png"] {
        let (status, _) = send(&app, get(&format!("/sessions/missing/{path}"))).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
    }
}

#[tokio::test]
async fn mask_before_any_post_conflicts() {
    let (_, app) = app();
    let id = create(&app, &sample(3).image).await;
    for path in ["mask.png", "overlay.png"] {
        let (status, _) = send(&app, get(&format!("/sessions/{id}/{path}"))).await;
        assert_eq!(status, StatusCode::CONFLICT);
    }
}

#[tokio::test]
async fn single_class_first_post_is_unprocessable() {
    let (_, app) = app();
    let s = sample(4);
    let id = create(&app, &s.image).await;
    let fg_only: Vec<Stroke> = first_strokes(&s).into_iter().filter(|k| k.label == StrokeLabel::Fg).collect();
    let (status, body) = post_strokes(&app, &id, "append", &fg_only).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(error_of(&body).contains("background"), "{}", error_of(&body));
    let (status, _) = post_strokes(&app, &id, "replace", &[]).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn out_of_bounds_stroke_is_unprocessable() {
    let (_, app) = app();
    let s = sample(4);
    let id = create(&app, &s.image).await;
    let mut strokes = first_strokes(&s);
    strokes[0].points.push([1e4, 1.0]);
    let (status, _) = post_strokes(&app, &id, "append", &strokes).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn two_strokes_segment_the_synthetic_image() {
    let (_, app) = app();
    for seed in 0..20 {
        let s = sample(seed);
        let id = create(&app, &s.image).await;
        let (status, body) = post_strokes(&app, &id, "append", &first_strokes(&s)).await;
        assert_eq!(status, StatusCode::OK);
        let summary: Summary = serde_json::from_slice(&body).unwrap();
        assert_eq!(summary.mask_url, format!("/sessions/{id}/mask.png"));
        assert!(summary.jaccard.is_none());
        assert!(summary.seconds > 0.0);
        let mask = mask_of(&app, &id).await;
        assert_eq!(mask.foreground_count(), summary.foreground_pixels);
        let score = ji(&mask, &s.ground_truth);
        assert!(score >= 0.95, "seed {seed}: JI {score}");
    }
}

#[tokio::test]
async fn empty_append_leaves_the_mask_alone() {
    let (_, app) = app();
    let s = sample(6);
    let id = create(&app, &s.image).await;
    post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    let before = mask_of(&app, &id).await;
    let (status, body) = post_strokes(&app, &id, "append", &[]).await;
    assert_eq!(status, StatusCode::OK);
    let summary: Summary = serde_json::from_slice(&body).unwrap();
    assert_eq!(summary.foreground_pixels, before.foreground_count());
    assert_eq!(mask_of(&app, &id).await, before);
}

#[tokio::test]
async fn replace_and_append_agree() {
    let (_, app) = app();
    for seed in [7, 8, 9] {
        let s = sample(seed);
        let all: Vec<Stroke> = first_strokes(&s).into_iter().chain(second_strokes(&s)).collect();
        let a = create(&app, &s.image).await;
        assert_eq!(post_strokes(&app, &a, "replace", &all).await.0, StatusCode::OK);
        let b = create(&app, &s.image).await;
        assert_eq!(post_strokes(&app, &b, "append", &first_strokes(&s)).await.0, StatusCode::OK);
        assert_eq!(post_strokes(&app, &b, "append", &second_strokes(&s)).await.0, StatusCode::OK);
        let score = ji(&mask_of(&app, &a).await, &mask_of(&app, &b).await);
        assert!(score >= 0.95, "seed {seed}: JI {score}");
    }
}

#[tokio::test]
async fn replace_discards_earlier_strokes() {
    let (_, app) = app();
    let s = sample(10);
    let id = create(&app, &s.image).await;
    post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    let (status, body) = post_strokes(&app, &id, "replace", &second_strokes(&s)).await;
    assert_eq!(status, StatusCode::OK);
    let summary: Summary = serde_json::from_slice(&body).unwrap();
    let (w, h) = s.image.dims();
    let scribbles = rasterize(&second_strokes(&s), w, h).unwrap();
    let direct = SessionState::start(&s.image, &scribbles, &SegmenterParams::default()).unwrap();
    assert_eq!(summary.pivots, direct.last().pivot_count);
    assert_eq!(mask_of(&app, &id).await, direct.last().mask);
}

#[tokio::test]
async fn sessions_do_not_share_state() {
    let (_, app) = app();
    let (s1, s2) = (sample(11), sample(12));
    let a = create(&app, &s1.image).await;
    let b = create(&app, &s2.image).await;
    post_strokes(&app, &a, "append", &first_strokes(&s1)).await;
    post_strokes(&app, &b, "append", &first_strokes(&s2)).await;
    post_strokes(&app, &a, "append", &second_strokes(&s1)).await;
    post_strokes(&app, &b, "append", &second_strokes(&s2)).await;
    for (id, s) in [(&a, &s1), (&b, &s2)] {
        let (w, h) = s.image.dims();
        let p = SegmenterParams::default();
        let mut st = SessionState::start(&s.image, &rasterize(&first_strokes(s), w, h).unwrap(), &p).unwrap();
        st.refine(&rasterize(&second_strokes(s), w, h).unwrap()).unwrap();
        assert_eq!(mask_of(&app, id).await, st.last().mask);
    }
}

#[tokio::test]
async fn overlapping_request_conflicts() {
    let (state, app) = app();
    let s = sample(13);
    let id = create(&app, &s.image).await;
    let session = state.store.get(&id).unwrap();
    let claim = session.try_claim().unwrap();
    let (status, _) = post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    drop(claim);
    let (status, _) = post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn parallel_posts_to_one_session_serialize() {
    let (_, app) = app();
    let s = sample(14);
    let id = create(&app, &s.image).await;
    let strokes = first_strokes(&s);
    let (r1, r2) = tokio::join!(
        post_strokes(&app, &id, "replace", &strokes),
        post_strokes(&app, &id, "replace", &strokes)
    );
    let mut codes = [r1.0, r2.0];
    codes.sort();
    assert!(codes[0] == StatusCode::OK, "{codes:?}");
    assert!(codes[1] == StatusCode::OK || codes[1] == StatusCode::CONFLICT, "{codes:?}");
}

#[tokio::test]
async fn overlay_tints_false_positives_red() {
    let (_, app) = app();
    let s = sample(15);
    let id = create(&app, &s.image).await;
    post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    let mask = mask_of(&app, &id).await;
    let (w, h) = mask.dims();
    let empty = Mask::filled(w, h, false);
    let (status, _) = send(&app, post_bytes(&format!("/sessions/{id}/groundtruth"), empty.encode_png())).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = send(&app, get(&format!("/sessions/{id}/overlay.png"))).await;
    assert_eq!(status, StatusCode::OK);
    let overlay = ImageRgb::decode_png(&body).unwrap();
    let interior = |x: usize, y: usize| {
        x > 0 && y > 0 && x + 1 < w && y + 1 < h && [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1), (x, y)].iter().all(|&(a, b)| mask.get(a, b))
    };
    let mut checked = 0;
    for y in 0..h {
        for x in 0..w {
            let (px, out) = (s.image.pixel(x, y), overlay.pixel(x, y));
            if interior(x, y) {
                let want = [0, 1, 2].map(|c| ((px[c] as u16 + [255u16, 0, 0][c]) / 2) as u8);
                assert_eq!(out, want, "({x}, {y})");
                checked += 1;
            } else if !mask.get(x, y) {
                assert_eq!(out, px);
            }
        }
    }
    assert!(checked > 100);
}

#[tokio::test]
async fn groundtruth_adds_jaccard_to_summaries() {
    let (_, app) = app();
    let s = sample(16);
    let id = create(&app, &s.image).await;
    let (status, _) = send(&app, post_bytes(&format!("/sessions/{id}/groundtruth"), s.ground_truth.encode_png())).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, body) = post_strokes(&app, &id, "append", &first_strokes(&s)).await;
    let summary: Summary = serde_json::from_slice(&body).unwrap();
    let want = ji(&mask_of(&app, &id).await, &s.ground_truth);
    assert_eq!(summary.jaccard, Some(want));
}

#[tokio::test]
async fn groundtruth_must_match_the_image() {
    let (_, app) = app();
    let id = create(&app, &sample(17).image).await;
    let small = Mask::filled(3, 3, true);
    let (status, _) = send(&app, post_bytes(&format!("/sessions/{id}/groundtruth"), small.encode_png())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = send(&app, post_bytes(&format!("/sessions/{id}/groundtruth"), vec![1, 2, 3])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn overrides_apply_on_replace_only() {
    let (_, app) = app();
    let s = sample(18);
    let id = create(&app, &s.image).await;
    let mut body = payload(&first_strokes(&s));
    body["params"] = serde_json::json!({ "eigvecs": 20, "features": "rgb,euc" });
    let uri = format!("/sessions/{id}/strokes?mode=replace");
    assert_eq!(send(&app, post_json(&uri, &body)).await.0, StatusCode::OK);
    let mut more = payload(&second_strokes(&s));
    more["params"] = serde_json::json!({ "eigvecs": 20, "features": "rgb,euc" });
    let append = format!("/sessions/{id}/strokes?mode=append");
    assert_eq!(send(&app, post_json(&append, &more)).await.0, StatusCode::OK);
    more["params"] = serde_json::json!({ "eigvecs": 30 });
    assert_eq!(send(&app, post_json(&append, &more)).await.0, StatusCode::BAD_REQUEST);
    body["params"] = serde_json::json!({ "lambda": -1.0 });
    assert_eq!(send(&app, post_json(&uri, &body)).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn static_files_are_served() {
    let dir = tempfile_dir();
    std::fs::write(dir.join("index.html"), "<html>scribble</html>").unwrap();
    let app = router(Arc::new(AppState::default()), Some(dir.clone()));
    let (status, body) = send(&app, get("/index.html")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(&body[..], b"<html>scribble</html>");
    let (status, _) = send(&app, get("/healthz")).await;
    assert_eq!(status, StatusCode::OK);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("sl-static-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
