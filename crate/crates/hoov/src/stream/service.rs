//! TCP service and replay client around the session pipeline.
//!
//! One connection is one session: the client streams IMU / head-pose /
//! tracked-wrist frames, the service runs the pipeline and answers with
//! tracked-wrist echoes, pose estimates, and pinch events. Sessions are
//! independent; each connection gets its own thread and pipeline.

use super::pipeline::{recording_to_frames, PipelineConfig, SessionPipeline};
use super::protocol::{encode_frame, FrameDecoder, WireMsg};
use crate::fov::FovConfig;
use crate::model::HoovNet;
use crate::synth::recording::Recording;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;

fn handle_connection(
    mut stream: TcpStream,
    net: Arc<HoovNet>,
    cfg: PipelineConfig,
) -> std::io::Result<()> {
    let mut pipe = SessionPipeline::new(net, cfg);
    let mut decoder = FrameDecoder::new();
    let mut read_buf = [0u8; 16 * 1024];
    loop {
        let n = match stream.read(&mut read_buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        decoder.push(&read_buf[..n]);
        let mut out = Vec::new();
        while let Some(msg) = decoder.next_frame() {
            for reply in pipe.handle(&msg) {
                out.extend_from_slice(&encode_frame(&reply));
            }
        }
        if !out.is_empty() {
            stream.write_all(&out)?;
        }
    }
    stream.flush()?;
    Ok(())
}

/// Accept loop. `max_connections` bounds the number of sessions served
/// before returning (tests); `None` serves until the process dies.
pub fn serve(
    listener: TcpListener,
    net: Arc<HoovNet>,
    cfg: PipelineConfig,
    max_connections: Option<usize>,
) -> std::io::Result<()> {
    let mut served = 0usize;
    for conn in listener.incoming() {
        let stream = conn?;
        let net = Arc::clone(&net);
        let cfg = cfg.clone();
        let handle = std::thread::spawn(move || {
            if let Err(e) = handle_connection(stream, net, cfg) {
                eprintln!("session error: {e}");
            }
        });
        served += 1;
        match max_connections {
            Some(limit) if served >= limit => {
                let _ = handle.join();
                break;
            }
            Some(_) => {
                let _ = handle.join();
            }
            None => {
                // detached: the accept loop keeps running
                drop(handle);
            }
        }
    }
    Ok(())
}

/// Binds an ephemeral local service (tests and examples). Returns the
/// bound address; the service thread serves `max_connections` then exits.
pub fn spawn_local_service(
    net: Arc<HoovNet>,
    cfg: PipelineConfig,
    max_connections: usize,
) -> std::io::Result<(SocketAddr, std::thread::JoinHandle<std::io::Result<()>>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let handle = std::thread::spawn(move || serve(listener, net, cfg, Some(max_connections)));
    Ok((addr, handle))
}

/// Streams a recording to a service and collects every response frame.
///
/// The writer runs on its own thread so a full TCP window on either side
/// cannot deadlock the exchange.
pub fn replay_recording(
    addr: impl ToSocketAddrs,
    rec: &Recording,
    fov: &FovConfig,
) -> std::io::Result<Vec<WireMsg>> {
    let frames = recording_to_frames(rec, fov);
    let stream = TcpStream::connect(addr)?;
    let mut writer = stream.try_clone()?;
    let writer_handle = std::thread::spawn(move || -> std::io::Result<()> {
        for f in &frames {
            writer.write_all(&encode_frame(f))?;
        }
        writer.flush()?;
        // half-close tells the service the session is over
        writer.shutdown(std::net::Shutdown::Write)?;
        Ok(())
    });

    let mut reader = stream;
    let mut decoder = FrameDecoder::new();
    let mut out = Vec::new();
    let mut buf = [0u8; 16 * 1024];
    loop {
        let n = match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        };
        decoder.push(&buf[..n]);
        while let Some(msg) = decoder.next_frame() {
            out.push(msg);
        }
    }
    writer_handle.join().expect("writer thread")?;
    Ok(out)
}
