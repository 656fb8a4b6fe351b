//! Topic broker with in-process and byte-stream transports.
//!
//! The broker core is synchronous and thread-safe: publishers push under one
//! lock, and every subscriber owns a bounded queue so a slow consumer drops
//! its own oldest messages instead of blocking anyone else. Per-publisher
//! FIFO order is preserved because delivery happens inside the publish call.
//!
//! Remote peers speak the frame grammar over any reliable ordered byte
//! stream; topic 0 carries the control verbs (advertise/subscribe). A TCP
//! listener and an in-process duplex pipe provide the two transports with
//! identical semantics.

use super::frame::{encode_frame, FrameDecoder};
use super::ProtocolError;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, Weak};
use std::time::{Duration, Instant};

/// Bound on each subscriber queue; the oldest message is dropped on overflow.
pub const DEFAULT_QUEUE_CAPACITY: usize = 4096;

const OP_ADVERTISE: u8 = 0x01;
const OP_SUBSCRIBE: u8 = 0x02;
const OP_UNKNOWN_TOPIC: u8 = 0xEE;
const CONTROL_TOPIC: u16 = 0;

#[derive(Debug, Default)]
struct SubQueue {
    queue: VecDeque<(u16, Vec<u8>)>,
    capacity: usize,
    dropped: u64,
    closed: bool,
}

#[derive(Debug)]
struct SubShared {
    inner: Mutex<SubQueue>,
    cv: Condvar,
}

#[derive(Debug, Default)]
struct TopicEntry {
    name: String,
    advertised: bool,
    subscribers: BTreeSet<u64>,
}

#[derive(Debug, Default)]
struct BrokerState {
    topics: BTreeMap<u16, TopicEntry>,
    subs: BTreeMap<u64, Arc<SubShared>>,
    next_sub_id: u64,
    published: u64,
    delivered: u64,
    dropped: u64,
}

/// Shared pub/sub hub. Cloning yields another handle to the same broker.
#[derive(Debug, Clone, Default)]
pub struct Broker {
    state: Arc<Mutex<BrokerState>>,
}

impl Broker {
    pub fn new() -> Self {
        Broker::default()
    }

    /// Register a topic for publishing. Idempotent; the last name wins.
    pub fn advertise(&self, topic_id: u16, name: &str) {
        let mut st = self.state.lock().unwrap();
        let entry = st.topics.entry(topic_id).or_default();
        entry.advertised = true;
        entry.name = name.to_string();
    }

    pub fn is_advertised(&self, topic_id: u16) -> bool {
        self.state
            .lock()
            .unwrap()
            .topics
            .get(&topic_id)
            .is_some_and(|t| t.advertised)
    }

    /// Create an empty subscription; bind topics with [`Broker::subscribe`].
    pub fn create_subscription(&self) -> Subscription {
        self.create_subscription_with_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    pub fn create_subscription_with_capacity(&self, capacity: usize) -> Subscription {
        let shared = Arc::new(SubShared {
            inner: Mutex::new(SubQueue {
                capacity: capacity.max(1),
                ..SubQueue::default()
            }),
            cv: Condvar::new(),
        });
        let mut st = self.state.lock().unwrap();
        let id = st.next_sub_id;
        st.next_sub_id += 1;
        st.subs.insert(id, shared.clone());
        Subscription {
            id,
            shared,
            broker: Arc::downgrade(&self.state),
        }
    }

    /// Deliver `topic_id` messages to this subscription from now on.
    /// Subscribing ahead of any advertise is allowed.
    pub fn subscribe(&self, sub: &Subscription, topic_id: u16) {
        let mut st = self.state.lock().unwrap();
        st.topics
            .entry(topic_id)
            .or_default()
            .subscribers
            .insert(sub.id);
    }

    /// Convenience: a fresh subscription bound to one topic.
    pub fn subscribe_topic(&self, topic_id: u16) -> Subscription {
        let sub = self.create_subscription();
        self.subscribe(&sub, topic_id);
        sub
    }

    /// Fan a payload out to every current subscriber of the topic.
    ///
    /// Returns the number of queues the message reached. Publishing to a
    /// topic nobody advertised is an error.
    pub fn publish(&self, topic_id: u16, payload: &[u8]) -> Result<usize, ProtocolError> {
        let mut st = self.state.lock().unwrap();
        let entry = match st.topics.get(&topic_id) {
            Some(e) if e.advertised => e,
            _ => return Err(ProtocolError::UnknownTopic(topic_id)),
        };
        let targets: Vec<Arc<SubShared>> = entry
            .subscribers
            .iter()
            .filter_map(|id| st.subs.get(id).cloned())
            .collect();
        st.published += 1;
        let mut reached = 0;
        let mut dropped = 0;
        for shared in &targets {
            let mut q = shared.inner.lock().unwrap();
            if q.closed {
                continue;
            }
            if q.queue.len() >= q.capacity {
                q.queue.pop_front();
                q.dropped += 1;
                dropped += 1;
            }
            q.queue.push_back((topic_id, payload.to_vec()));
            reached += 1;
            shared.cv.notify_one();
        }
        st.delivered += reached as u64;
        st.dropped += dropped as u64;
        Ok(reached)
    }

    /// (published, delivered, dropped) totals.
    pub fn counters(&self) -> (u64, u64, u64) {
        let st = self.state.lock().unwrap();
        (st.published, st.delivered, st.dropped)
    }

    /// Serve the wire protocol for one connection; blocks until it closes.
    pub fn serve_stream<S: SplitStream>(&self, stream: S) -> Result<(), ProtocolError> {
        let (mut reader, writer) = stream.split()?;
        let sub = self.create_subscription();
        let writer_sub = sub.shared.clone();
        let stop = Arc::new(AtomicBool::new(false));
        let writer_stop = stop.clone();
        let writer_handle = std::thread::spawn(move || {
            let mut writer = writer;
            loop {
                let msg = {
                    let mut q = writer_sub.inner.lock().unwrap();
                    loop {
                        if let Some(m) = q.queue.pop_front() {
                            break Some(m);
                        }
                        if q.closed || writer_stop.load(Ordering::Relaxed) {
                            break None;
                        }
                        let (guard, _) = writer_sub
                            .cv
                            .wait_timeout(q, Duration::from_millis(50))
                            .unwrap();
                        q = guard;
                    }
                };
                match msg {
                    Some((topic, payload)) => {
                        let bytes = match encode_frame(topic, &payload) {
                            Ok(b) => b,
                            Err(_) => continue,
                        };
                        if writer.write_all(&bytes).and_then(|_| writer.flush()).is_err() {
                            break;
                        }
                    }
                    None => {
                        if writer_stop.load(Ordering::Relaxed) {
                            break;
                        }
                    }
                }
            }
        });

        let mut decoder = FrameDecoder::new();
        let mut buf = [0u8; 4096];
        let result = loop {
            let n = match reader.read(&mut buf) {
                Ok(0) => break Ok(()),
                Ok(n) => n,
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => continue,
                Err(e) if e.kind() == std::io::ErrorKind::TimedOut => continue,
                Err(e) => break Err(ProtocolError::Io(e)),
            };
            decoder.push(&buf[..n]);
            while let Some(frame) = decoder.next_frame() {
                if frame.topic_id == CONTROL_TOPIC {
                    self.handle_control(&sub, &frame.payload);
                } else if self.publish(frame.topic_id, &frame.payload).is_err() {
                    // Tell the publisher; delivery best-effort.
                    let mut notice = vec![OP_UNKNOWN_TOPIC];
                    notice.extend_from_slice(&frame.topic_id.to_le_bytes());
                    let mut q = sub.shared.inner.lock().unwrap();
                    q.queue.push_back((CONTROL_TOPIC, notice));
                    sub.shared.cv.notify_one();
                }
            }
        };
        stop.store(true, Ordering::Relaxed);
        sub.shared.cv.notify_all();
        let _ = writer_handle.join();
        result
    }

    fn handle_control(&self, sub: &Subscription, payload: &[u8]) {
        if payload.len() < 3 {
            return;
        }
        let topic = u16::from_le_bytes([payload[1], payload[2]]);
        match payload[0] {
            OP_ADVERTISE => {
                let name = std::str::from_utf8(&payload[3..]).unwrap_or("");
                self.advertise(topic, name);
            }
            OP_SUBSCRIBE => self.subscribe(sub, topic),
            _ => {}
        }
    }
}

/// Receiving end of a broker binding; drop to disconnect.
#[derive(Debug)]
pub struct Subscription {
    id: u64,
    shared: Arc<SubShared>,
    broker: Weak<Mutex<BrokerState>>,
}

impl Subscription {
    /// Pop one queued message without waiting.
    pub fn try_recv(&self) -> Option<(u16, Vec<u8>)> {
        self.shared.inner.lock().unwrap().queue.pop_front()
    }

    /// Pop one message, waiting up to `timeout` for one to arrive.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<(u16, Vec<u8>)> {
        let deadline = Instant::now() + timeout;
        let mut q = self.shared.inner.lock().unwrap();
        loop {
            if let Some(m) = q.queue.pop_front() {
                return Some(m);
            }
            let now = Instant::now();
            if q.closed || now >= deadline {
                return None;
            }
            let (guard, _) = self
                .shared
                .cv
                .wait_timeout(q, deadline - now)
                .unwrap();
            q = guard;
        }
    }

    /// Drain everything queued right now.
    pub fn drain(&self) -> Vec<(u16, Vec<u8>)> {
        let mut q = self.shared.inner.lock().unwrap();
        q.queue.drain(..).collect()
    }

    /// Messages this subscriber lost to queue overflow.
    pub fn dropped(&self) -> u64 {
        self.shared.inner.lock().unwrap().dropped
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        {
            let mut q = self.shared.inner.lock().unwrap();
            q.closed = true;
        }
        self.shared.cv.notify_all();
        if let Some(state) = self.broker.upgrade() {
            let mut st = state.lock().unwrap();
            st.subs.remove(&self.id);
            for topic in st.topics.values_mut() {
                topic.subscribers.remove(&self.id);
            }
        }
    }
}

/// A byte stream that can be split into independently-owned read and write
/// halves sharing the same connection.
pub trait SplitStream: Read + Write + Send + Sized + 'static {
    fn split(self) -> std::io::Result<(Self, Self)>;
    fn set_stream_read_timeout(&self, timeout: Option<Duration>) -> std::io::Result<()>;
}

impl SplitStream for TcpStream {
    fn split(self) -> std::io::Result<(Self, Self)> {
        let clone = self.try_clone()?;
        Ok((self, clone))
    }

    fn set_stream_read_timeout(&self, timeout: Option<Duration>) -> std::io::Result<()> {
        self.set_read_timeout(timeout)
    }
}

#[derive(Debug, Default)]
struct PipeInner {
    buf: VecDeque<u8>,
    writers: usize,
}

#[derive(Debug, Default)]
struct Pipe {
    inner: Mutex<PipeInner>,
    cv: Condvar,
}

/// One end of an in-process reliable byte pipe; the loopback transport.
#[derive(Debug)]
pub struct DuplexStream {
    rx: Arc<Pipe>,
    tx: Arc<Pipe>,
    read_timeout: Arc<Mutex<Option<Duration>>>,
}

/// Connected pair of in-process byte streams.
pub fn duplex_pair() -> (DuplexStream, DuplexStream) {
    let a = Arc::new(Pipe::default());
    let b = Arc::new(Pipe::default());
    a.inner.lock().unwrap().writers = 1;
    b.inner.lock().unwrap().writers = 1;
    (
        DuplexStream {
            rx: a.clone(),
            tx: b.clone(),
            read_timeout: Arc::new(Mutex::new(None)),
        },
        DuplexStream {
            rx: b,
            tx: a,
            read_timeout: Arc::new(Mutex::new(None)),
        },
    )
}

impl Clone for DuplexStream {
    fn clone(&self) -> Self {
        self.tx.inner.lock().unwrap().writers += 1;
        DuplexStream {
            rx: self.rx.clone(),
            tx: self.tx.clone(),
            read_timeout: self.read_timeout.clone(),
        }
    }
}

impl Drop for DuplexStream {
    fn drop(&mut self) {
        let mut inner = self.tx.inner.lock().unwrap();
        inner.writers = inner.writers.saturating_sub(1);
        if inner.writers == 0 {
            self.tx.cv.notify_all();
        }
        // Wake readers of our rx side too so a blocked read can observe EOF.
        self.rx.cv.notify_all();
    }
}

impl Read for DuplexStream {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let timeout = *self.read_timeout.lock().unwrap();
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut inner = self.rx.inner.lock().unwrap();
        loop {
            if !inner.buf.is_empty() {
                let n = inner.buf.len().min(buf.len());
                for slot in buf.iter_mut().take(n) {
                    *slot = inner.buf.pop_front().unwrap();
                }
                return Ok(n);
            }
            if inner.writers == 0 {
                return Ok(0);
            }
            let wait = match deadline {
                Some(d) => {
                    let now = Instant::now();
                    if now >= d {
                        return Err(std::io::Error::new(
                            std::io::ErrorKind::TimedOut,
                            "read timed out",
                        ));
                    }
                    d - now
                }
                None => Duration::from_millis(100),
            };
            let (guard, _) = self.rx.cv.wait_timeout(inner, wait).unwrap();
            inner = guard;
        }
    }
}

impl Write for DuplexStream {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let mut inner = self.tx.inner.lock().unwrap();
        inner.buf.extend(buf.iter().copied());
        self.tx.cv.notify_all();
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl SplitStream for DuplexStream {
    fn split(self) -> std::io::Result<(Self, Self)> {
        let clone = self.clone();
        Ok((self, clone))
    }

    fn set_stream_read_timeout(&self, timeout: Option<Duration>) -> std::io::Result<()> {
        *self.read_timeout.lock().unwrap() = timeout;
        Ok(())
    }
}

/// TCP front-end for a [`Broker`].
pub struct BrokerServer {
    broker: Broker,
    local_addr: std::net::SocketAddr,
    stop: Arc<AtomicBool>,
    accept_handle: Option<std::thread::JoinHandle<()>>,
    connections: Arc<AtomicU64>,
}

impl BrokerServer {
    /// Bind and start accepting; `addr` like `"127.0.0.1:7447"` (port 0
    /// picks a free one).
    pub fn bind<A: ToSocketAddrs>(broker: Broker, addr: A) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local_addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept_stop = stop.clone();
        let accept_broker = broker.clone();
        let connections = Arc::new(AtomicU64::new(0));
        let conn_counter = connections.clone();
        let accept_handle = std::thread::spawn(move || {
            while !accept_stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        stream.set_nodelay(true).ok();
                        stream.set_nonblocking(false).ok();
                        stream
                            .set_read_timeout(Some(Duration::from_millis(100)))
                            .ok();
                        conn_counter.fetch_add(1, Ordering::Relaxed);
                        let broker = accept_broker.clone();
                        std::thread::spawn(move || {
                            let _ = broker.serve_stream(stream);
                        });
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(5));
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(BrokerServer {
            broker,
            local_addr,
            stop,
            accept_handle: Some(accept_handle),
            connections,
        })
    }

    pub fn broker(&self) -> &Broker {
        &self.broker
    }

    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.local_addr
    }

    pub fn connection_count(&self) -> u64 {
        self.connections.load(Ordering::Relaxed)
    }
}

impl Drop for BrokerServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.accept_handle.take() {
            let _ = h.join();
        }
    }
}

/// Client side of the wire protocol, over TCP or a loopback pipe.
pub struct RemoteClient<S: SplitStream> {
    reader: S,
    writer: S,
    decoder: FrameDecoder,
    unknown_topic_errors: u64,
}

impl RemoteClient<TcpStream> {
    pub fn connect_tcp<A: ToSocketAddrs>(addr: A) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        RemoteClient::over(stream)
    }
}

impl<S: SplitStream> RemoteClient<S> {
    pub fn over(stream: S) -> std::io::Result<Self> {
        let (reader, writer) = stream.split()?;
        reader.set_stream_read_timeout(Some(Duration::from_millis(20)))?;
        Ok(RemoteClient {
            reader,
            writer,
            decoder: FrameDecoder::new(),
            unknown_topic_errors: 0,
        })
    }

    fn send(&mut self, topic: u16, payload: &[u8]) -> Result<(), ProtocolError> {
        let bytes = encode_frame(topic, payload)?;
        self.writer.write_all(&bytes)?;
        self.writer.flush()?;
        Ok(())
    }

    pub fn advertise(&mut self, topic: u16, name: &str) -> Result<(), ProtocolError> {
        let mut payload = vec![OP_ADVERTISE];
        payload.extend_from_slice(&topic.to_le_bytes());
        payload.extend_from_slice(name.as_bytes());
        self.send(CONTROL_TOPIC, &payload)
    }

    pub fn subscribe(&mut self, topic: u16) -> Result<(), ProtocolError> {
        let mut payload = vec![OP_SUBSCRIBE];
        payload.extend_from_slice(&topic.to_le_bytes());
        self.send(CONTROL_TOPIC, &payload)
    }

    pub fn publish(&mut self, topic: u16, payload: &[u8]) -> Result<(), ProtocolError> {
        self.send(topic, payload)
    }

    /// Unknown-topic rejections reported back by the broker.
    pub fn unknown_topic_errors(&self) -> u64 {
        self.unknown_topic_errors
    }

    /// Collect data frames arriving within the window.
    pub fn poll_messages(&mut self, window: Duration) -> Vec<(u16, Vec<u8>)> {
        let deadline = Instant::now() + window;
        let mut out = Vec::new();
        let mut buf = [0u8; 4096];
        loop {
            while let Some(frame) = self.decoder.next_frame() {
                if frame.topic_id == CONTROL_TOPIC {
                    if frame.payload.first() == Some(&OP_UNKNOWN_TOPIC) {
                        self.unknown_topic_errors += 1;
                    }
                } else {
                    out.push((frame.topic_id, frame.payload));
                }
            }
            if Instant::now() >= deadline {
                return out;
            }
            match self.reader.read(&mut buf) {
                Ok(0) => return out,
                Ok(n) => self.decoder.push(&buf[..n]),
                Err(e)
                    if e.kind() == std::io::ErrorKind::WouldBlock
                        || e.kind() == std::io::ErrorKind::TimedOut => {}
                Err(_) => return out,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fan_out_preserves_per_publisher_order() {
        let broker = Broker::new();
        broker.advertise(3, "/odom");
        let subs: Vec<Subscription> = (0..3).map(|_| broker.subscribe_topic(3)).collect();
        for k in 0..100u8 {
            broker.publish(3, &[k]).unwrap();
        }
        for sub in &subs {
            let got = sub.drain();
            assert_eq!(got.len(), 100);
            for (k, (topic, payload)) in got.iter().enumerate() {
                assert_eq!(*topic, 3);
                assert_eq!(payload[0], k as u8);
            }
        }
        let (published, delivered, dropped) = broker.counters();
        assert_eq!(published, 100);
        assert_eq!(delivered, 300);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn publish_to_unadvertised_topic_is_rejected() {
        let broker = Broker::new();
        assert!(matches!(
            broker.publish(42, &[1]),
            Err(ProtocolError::UnknownTopic(42))
        ));
        // A subscribe alone does not make the topic publishable.
        let _sub = broker.subscribe_topic(42);
        assert!(broker.publish(42, &[1]).is_err());
        broker.advertise(42, "/x");
        assert!(broker.publish(42, &[1]).is_ok());
    }

    #[test]
    fn two_publishers_interleave_but_keep_each_sequence_in_order() {
        let broker = Broker::new();
        broker.advertise(1, "/cmd_vel");
        let sub = broker.subscribe_topic(1);
        let b1 = broker.clone();
        let b2 = broker.clone();
        let t1 = std::thread::spawn(move || {
            for k in 0..200u16 {
                b1.publish(1, &[0xA, (k >> 8) as u8, k as u8]).unwrap();
            }
        });
        let t2 = std::thread::spawn(move || {
            for k in 0..200u16 {
                b2.publish(1, &[0xB, (k >> 8) as u8, k as u8]).unwrap();
            }
        });
        t1.join().unwrap();
        t2.join().unwrap();
        let all = sub.drain();
        assert_eq!(all.len(), 400);
        let seq = |tag: u8| -> Vec<u16> {
            all.iter()
                .filter(|(_, p)| p[0] == tag)
                .map(|(_, p)| ((p[1] as u16) << 8) | p[2] as u16)
                .collect()
        };
        assert_eq!(seq(0xA), (0..200).collect::<Vec<_>>());
        assert_eq!(seq(0xB), (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn slow_subscriber_drops_oldest_without_blocking_others() {
        let broker = Broker::new();
        broker.advertise(7, "/laser");
        let slow = broker.create_subscription_with_capacity(10);
        broker.subscribe(&slow, 7);
        let fast = broker.subscribe_topic(7);
        for k in 0..50u8 {
            broker.publish(7, &[k]).unwrap();
        }
        let fast_msgs = fast.drain();
        assert_eq!(fast_msgs.len(), 50);
        let slow_msgs = slow.drain();
        assert_eq!(slow_msgs.len(), 10);
        // Oldest dropped: the newest ten survive.
        assert_eq!(slow_msgs[0].1[0], 40);
        assert_eq!(slow.dropped(), 40);
    }

    #[test]
    fn dropped_subscription_leaves_fanout() {
        let broker = Broker::new();
        broker.advertise(2, "/laser");
        let a = broker.subscribe_topic(2);
        let b = broker.subscribe_topic(2);
        broker.publish(2, &[1]).unwrap();
        drop(a);
        broker.publish(2, &[2]).unwrap();
        let got = b.drain();
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn loopback_transport_round_trip() {
        let broker = Broker::new();
        let (server_end, client_end) = duplex_pair();
        let serve_broker = broker.clone();
        let handle = std::thread::spawn(move || {
            let _ = serve_broker.serve_stream(server_end);
        });
        let mut client = RemoteClient::over(client_end).unwrap();
        client.advertise(5, "/imu").unwrap();
        client.subscribe(5).unwrap();
        std::thread::sleep(Duration::from_millis(50));
        client.publish(5, &[9, 9]).unwrap();
        let msgs = client.poll_messages(Duration::from_millis(500));
        assert_eq!(msgs, vec![(5u16, vec![9, 9])]);
        drop(client);
        handle.join().unwrap();
    }

    #[test]
    fn unknown_topic_over_wire_reports_error_frame() {
        let broker = Broker::new();
        let (server_end, client_end) = duplex_pair();
        let serve_broker = broker.clone();
        let handle = std::thread::spawn(move || {
            let _ = serve_broker.serve_stream(server_end);
        });
        let mut client = RemoteClient::over(client_end).unwrap();
        client.publish(99, &[1]).unwrap();
        let msgs = client.poll_messages(Duration::from_millis(500));
        assert!(msgs.is_empty());
        assert_eq!(client.unknown_topic_errors(), 1);
        drop(client);
        handle.join().unwrap();
    }
}
