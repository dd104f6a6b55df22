//! Blocking HTTP transport.

use std::time::Duration;

use super::{HttpReply, Transport, TransportFailure};

#[derive(Debug, Clone)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn post(
        &self,
        url: &str,
        body: &[u8],
        bearer: Option<&str>,
        timeout: Duration,
    ) -> Result<HttpReply, TransportFailure> {
        let mut req = self
            .agent
            .post(url)
            .header("Content-Type", "application/json")
            .config()
            .timeout_global(Some(timeout))
            .build();
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportFailure::Timeout,
            other => TransportFailure::Connect(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TransportFailure::Timeout,
                other => TransportFailure::Connect(other.to_string()),
            })?;
        Ok(HttpReply { status, body })
    }
}
