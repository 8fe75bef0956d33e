//! A producer thread writes 24-byte records into the shared ring while the
//! consumer drains it. When the ring is full the newest record is dropped
//! and counted.

use std::thread;
use std::time::Duration;

use reqlens::ring::{record_ring, DEFAULT_RING_BYTES};
use reqlens::RequestRecord;

fn main() {
    let (mut producer, mut consumer) = record_ring(DEFAULT_RING_BYTES).expect("valid size");
    println!("{} bytes, {} slots", consumer.capacity_bytes(), consumer.capacity_slots());

    let total = 200_000u64;
    let writer = thread::spawn(move || {
        for i in 0..total {
            // Same bytes a kernel-side capture would write.
            let wire = RequestRecord::new(i, i % 1000, 1).to_wire();
            producer.push_wire(&wire).expect("24-byte record");
            if i % 10_000 == 0 {
                thread::sleep(Duration::from_millis(1));
            }
        }
        producer.dropped()
    });

    let mut received = 0u64;
    let mut last = None;
    let mut buf = Vec::new();
    while !writer.is_finished() || !consumer.is_empty() {
        buf.clear();
        if consumer.poll_into(4096, &mut buf) == 0 {
            thread::yield_now();
        }
        for r in &buf {
            assert!(last < Some(r.start_ts), "out of order");
            last = Some(r.start_ts);
        }
        received += buf.len() as u64;
    }
    let dropped = writer.join().unwrap();
    println!("sent {total}, received {received}, dropped {dropped}");
    assert_eq!(received + dropped, total);
}
