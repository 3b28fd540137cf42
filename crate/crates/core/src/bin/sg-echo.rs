//! Test fixture speaking the backend wire protocol on stdin/stdout.
//!
//! ```text
//! sg-echo [--hello FLAGS] [--mode constant|color|error|truncate|garbage|silent]
//!         [--logits a,b,c,d,e,f] [--message TEXT] [--die-after N] [--sleep-ms N]
//! ```
//!
//! `constant` answers every tile with the given per-class logits, `color`
//! with color-model log-densities of the default palette, `error` with an
//! error frame carrying `--message`. `truncate` and `garbage` write broken
//! responses; `silent` never answers.

use std::io::{self, BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::time::Duration;

use cartoseg::backend::wire::{self, Frame, FrameReader};
use cartoseg::backend::HeuristicBackend;
use cartoseg::synth::ColorModel;
use cartoseg::{Logits, NUM_CLASSES};

struct Args {
    hello: Option<u8>,
    mode: String,
    logits: [f32; NUM_CLASSES],
    message: String,
    die_after: Option<usize>,
    sleep_ms: u64,
}

fn parse_args() -> Result<Args, String> {
    let mut a = Args {
        hello: None,
        mode: "constant".into(),
        logits: [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        message: "echo: tile refused".into(),
        die_after: None,
        sleep_ms: 0,
    };
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut value = || it.next().ok_or_else(|| format!("{flag} needs a value"));
        match flag.as_str() {
            "--hello" => a.hello = Some(value()?.parse().map_err(|e| format!("--hello: {e}"))?),
            "--mode" => a.mode = value()?,
            "--message" => a.message = value()?,
            "--die-after" => a.die_after = Some(value()?.parse().map_err(|e| format!("--die-after: {e}"))?),
            "--sleep-ms" => a.sleep_ms = value()?.parse().map_err(|e| format!("--sleep-ms: {e}"))?,
            "--logits" => {
                let v: Vec<f32> = value()?
                    .split(',')
                    .map(|s| s.trim().parse::<f32>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| format!("--logits: {e}"))?;
                a.logits = v.try_into().map_err(|_| "--logits needs six values".to_string())?;
            }
            other => return Err(format!("unknown argument {other}")),
        }
    }
    Ok(a)
}

fn color_logits(model: &HeuristicBackend, width: u32, height: u32, rgb: &[u8]) -> Logits {
    let mut l = Logits::zeros(width, height, NUM_CLASSES as u32);
    let n = l.plane_len();
    let data = l.as_mut_slice();
    for (i, p) in rgb.chunks_exact(3).enumerate() {
        for (k, v) in model.pixel_logits([p[0], p[1], p[2]]).iter().enumerate() {
            data[k * n + i] = *v;
        }
    }
    l
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("sg-echo: {e}");
            return ExitCode::from(2);
        }
    };
    let heuristic = HeuristicBackend::new(&ColorModel::default_palette()).expect("default palette covers all classes");
    let mut out = BufWriter::new(io::stdout().lock());
    if let Some(flags) = args.hello {
        if wire::write_frame(&mut out, &Frame::Hello { flags }).is_err() {
            return ExitCode::FAILURE;
        }
    }
    let mut reader = FrameReader::new(BufReader::new(io::stdin().lock()));
    let mut answered = 0usize;
    loop {
        let (width, height, rgb) = match reader.read_frame() {
            Ok(Some(Frame::Request { width, height, rgb })) => (width, height, rgb),
            Ok(None) => return ExitCode::SUCCESS,
            Ok(Some(other)) => {
                let _ = wire::write_frame(&mut out, &Frame::Error(format!("unexpected {} frame", other.kind())));
                continue;
            }
            Err(e) => {
                let _ = wire::write_frame(&mut out, &Frame::Error(e.to_string()));
                return ExitCode::FAILURE;
            }
        };
        if args.die_after.is_some_and(|n| answered >= n) {
            return ExitCode::from(3);
        }
        if args.sleep_ms > 0 {
            std::thread::sleep(Duration::from_millis(args.sleep_ms));
        }
        let frame = match args.mode.as_str() {
            "constant" => Frame::Response(Logits::constant(width, height, &args.logits)),
            "color" => Frame::Response(color_logits(&heuristic, width, height, &rgb)),
            "error" => Frame::Error(args.message.clone()),
            "truncate" => {
                let bytes = wire::encode(&Frame::Response(Logits::constant(width, height, &args.logits)));
                let _ = out.write_all(&bytes[..bytes.len() / 2]);
                let _ = out.flush();
                return ExitCode::SUCCESS;
            }
            "garbage" => {
                let _ = out.write_all(b"JUNKJUNKJUNK");
                let _ = out.flush();
                continue;
            }
            "silent" => {
                std::thread::sleep(Duration::from_secs(3600));
                return ExitCode::SUCCESS;
            }
            other => {
                eprintln!("sg-echo: unknown mode {other}");
                return ExitCode::from(2);
            }
        };
        if wire::write_frame(&mut out, &frame).is_err() {
            return ExitCode::FAILURE;
        }
        answered += 1;
    }
}
