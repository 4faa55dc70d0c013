use std::time::Duration;

use tokio::sync::{Mutex, Semaphore, SemaphorePermit};
use tokio::time::Instant;

struct Bucket {
    tokens: f64,
    last: Instant,
}

/// Caps concurrent requests and paces their start times with a token bucket
/// whose burst equals the concurrency cap.
pub struct RateLimiter {
    in_flight: Semaphore,
    capacity: f64,
    rate: Option<f64>,
    bucket: Mutex<Bucket>,
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, requests_per_second: f64) -> Self {
        Self::build(max_in_flight, Some(requests_per_second))
    }

    /// Concurrency cap only.
    pub fn unpaced(max_in_flight: usize) -> Self {
        Self::build(max_in_flight, None)
    }

    fn build(max_in_flight: usize, rate: Option<f64>) -> Self {
        let cap = max_in_flight.max(1);
        RateLimiter {
            in_flight: Semaphore::new(cap),
            capacity: cap as f64,
            rate: rate.filter(|r| *r > 0.0),
            bucket: Mutex::new(Bucket {
                tokens: cap as f64,
                last: Instant::now(),
            }),
        }
    }

    /// Waits for a free slot and a token. The slot is held until the permit
    /// is dropped.
    pub async fn acquire(&self) -> SemaphorePermit<'_> {
        let permit = self.in_flight.acquire().await.expect("semaphore never closed");
        if let Some(rate) = self.rate {
            loop {
                let wait = {
                    let mut b = self.bucket.lock().await;
                    let now = Instant::now();
                    let elapsed = now.duration_since(b.last).as_secs_f64();
                    b.tokens = (b.tokens + elapsed * rate).min(self.capacity);
                    b.last = now;
                    if b.tokens >= 1.0 {
                        b.tokens -= 1.0;
                        None
                    } else {
                        Some(Duration::from_secs_f64((1.0 - b.tokens) / rate))
                    }
                };
                match wait {
                    None => break,
                    Some(d) => tokio::time::sleep(d).await,
                }
            }
        }
        permit
    }
}
