//! The child-process backend driven against the `sg-echo` fixture.

use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};

use cartoseg::backend::wire::WireError;
use cartoseg::backend::{BackendError, ExternalBackend, ExternalConfig, SegmentationBackend, TileContext};
use cartoseg::inference::{multiscale_infer, InferError, InferOptions};
use cartoseg::SemanticClass;

fn echo(args: &str) -> ExternalConfig {
    ExternalConfig::new(format!("'{}' {args}", env!("CARGO_BIN_EXE_sg-echo")))
}

fn ctx() -> TileContext {
    TileContext { x: 0, y: 0, scale: 1.0, image_width: 8, image_height: 8 }
}

fn tile() -> RgbImage {
    RgbImage::from_pixel(8, 8, Rgb([200, 180, 150]))
}

#[test]
fn constant_logits_come_back() {
    let b = ExternalBackend::spawn(echo("--hello 0 --logits 0,0,0,0,2.5,0")).unwrap();
    let l = b.evaluate(&tile(), &ctx()).unwrap();
    assert_eq!((l.width(), l.height(), l.classes()), (8, 8, 6));
    assert!(l.plane(4).iter().all(|&v| v == 2.5));
    assert_eq!(l.argmax().get(3, 3), SemanticClass::Water);
}

#[test]
fn error_frame_text_is_passed_through() {
    let b = ExternalBackend::spawn(echo("--mode error --message 'model weights missing: ckpt/ü.pt'")).unwrap();
    match b.evaluate(&tile(), &ctx()) {
        Err(BackendError::Remote(msg)) => assert_eq!(msg, "model weights missing: ckpt/ü.pt"),
        other => panic!("expected remote error, got {other:?}"),
    }
    // The process is still alive and keeps answering.
    assert!(matches!(b.evaluate(&tile(), &ctx()), Err(BackendError::Remote(_))));
}

#[test]
fn truncated_response_reports_counts() {
    let b = ExternalBackend::spawn(echo("--mode truncate")).unwrap();
    // 8x8x6 f32 = 1536 payload bytes after a 16-byte header; half of the
    // 1552-byte frame leaves 760 payload bytes.
    match b.evaluate(&tile(), &ctx()) {
        Err(BackendError::Protocol(WireError::Truncated { offset, field, expected, received })) => {
            assert_eq!((offset, field, expected, received), (16, "response payload", 1536, 760));
        }
        other => panic!("expected truncation, got {other:?}"),
    }
    assert!(matches!(b.evaluate(&tile(), &ctx()), Err(BackendError::Dead(_))));
}

#[test]
fn garbage_is_a_protocol_error() {
    let g = ExternalBackend::spawn(echo("--mode garbage")).unwrap();
    let err = g.evaluate(&tile(), &ctx()).unwrap_err();
    assert!(matches!(err, BackendError::Protocol(WireError::BadMagic { offset: 0, found }) if &found == b"JUNK"), "{err}");
}

#[test]
fn dying_process_is_reported_dead() {
    let b = ExternalBackend::spawn(echo("--die-after 2")).unwrap();
    b.evaluate(&tile(), &ctx()).unwrap();
    b.evaluate(&tile(), &ctx()).unwrap();
    let err = b.evaluate(&tile(), &ctx()).unwrap_err();
    assert!(matches!(err, BackendError::Dead(_)), "{err}");
    assert!(err.to_string().contains("exit"), "{err}");
    assert!(matches!(b.evaluate(&tile(), &ctx()), Err(BackendError::Dead(_))));
}

#[test]
fn silent_process_times_out() {
    let mut cfg = echo("--mode silent");
    cfg.timeout = Some(Duration::from_millis(300));
    let b = ExternalBackend::spawn(cfg).unwrap();
    let start = Instant::now();
    assert!(matches!(b.evaluate(&tile(), &ctx()), Err(BackendError::Timeout(300))));
    assert!(start.elapsed() < Duration::from_secs(5));
}

#[test]
fn missing_command_fails_at_start() {
    let err = ExternalBackend::spawn(ExternalConfig::new("exit 7")).err().expect("spawn must fail");
    assert!(matches!(err, BackendError::Dead(_)), "{err}");
}

#[test]
fn handshake_flag_controls_process_count() {
    let mut cfg = echo("--hello 1");
    cfg.max_workers = 3;
    let b = ExternalBackend::spawn(cfg.clone()).unwrap();
    assert_eq!(b.worker_count(), 3);
    // Later processes send their own handshake, which must be skipped.
    for _ in 0..6 {
        b.evaluate(&tile(), &ctx()).unwrap();
    }
    cfg.command = echo("--hello 0").command;
    assert_eq!(ExternalBackend::spawn(cfg.clone()).unwrap().worker_count(), 1);
    cfg.command = echo("").command;
    assert_eq!(ExternalBackend::spawn(cfg).unwrap().worker_count(), 1);
}

#[test]
fn inference_error_names_the_tile() {
    let b = ExternalBackend::spawn(echo("--mode error --message nope")).unwrap();
    let img = RgbImage::new(40, 30);
    let opts = InferOptions { scales: vec![1.0], patch: 16, overlap: 0, ..InferOptions::default() };
    match multiscale_infer(&img, &b, &opts) {
        Err(InferError::Tile { x: 0, y: 0, error: BackendError::Remote(m), .. }) => assert_eq!(m, "nope"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn concurrent_workers_match_serial() {
    let img = RgbImage::from_fn(90, 70, |x, y| Rgb([(x * 3) as u8, (y * 3) as u8, ((x + y) * 2) as u8]));
    let opts = InferOptions { patch: 32, overlap: 8, ..InferOptions::default() };
    let serial = ExternalBackend::spawn(echo("--mode color")).unwrap();
    let mut cfg = echo("--mode color --hello 1");
    cfg.max_workers = 4;
    let parallel = ExternalBackend::spawn(cfg).unwrap();
    let a = multiscale_infer(&img, &serial, &opts).unwrap();
    let b = multiscale_infer(&img, &parallel, &opts).unwrap();
    assert_eq!(a.logits, b.logits);
}
