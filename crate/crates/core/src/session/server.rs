//! Line-delimited JSON over TCP, one client at a time.
//!
//! A reader thread pushes incoming lines onto a channel; the simulation
//! thread owns the [`Session`], drains the channel between steps and, while
//! playing, emits at most one frame per frame period.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::{Reply, Session};

pub const TARGET_FPS: f64 = 60.0;
const IDLE_POLL: Duration = Duration::from_millis(200);

/// Serves clients one after another until the listener fails.
pub fn serve(listener: TcpListener, session: &mut Session, fps: f64) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let peer = stream.peer_addr().ok();
        log::info!("client connected: {peer:?}");
        if let Err(e) = serve_connection(stream, session, fps) {
            log::warn!("client {peer:?} dropped: {e}");
        }
    }
    Ok(())
}

fn write_replies(out: &mut impl Write, replies: &[Reply]) -> io::Result<()> {
    for reply in replies {
        out.write_all(reply.to_line().as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Runs one client until it disconnects.
pub fn serve_connection(stream: TcpStream, session: &mut Session, fps: f64) -> io::Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let (tx, rx) = mpsc::channel::<String>();
    let intake = thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let mut out = BufWriter::new(stream);
    let period = Duration::from_secs_f64(1.0 / fps.max(1e-3));
    let mut next_frame = Instant::now();
    let result = loop {
        let wait = if session.is_playing() {
            next_frame.saturating_duration_since(Instant::now())
        } else {
            IDLE_POLL
        };
        match rx.recv_timeout(wait) {
            Ok(line) => {
                let mut replies = session.handle_line(&line);
                while let Ok(line) = rx.try_recv() {
                    replies.extend(session.handle_line(&line));
                }
                if let Err(e) = write_replies(&mut out, &replies) {
                    break Err(e);
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break Ok(()),
        }
        if session.is_playing() && Instant::now() >= next_frame {
            next_frame = Instant::now() + period;
            if let Some(frame) = session.tick() {
                if let Err(e) = write_replies(&mut out, &[frame]) {
                    break Err(e);
                }
            }
        }
    };
    let _ = out.get_ref().shutdown(std::net::Shutdown::Both);
    let _ = intake.join();
    result
}
