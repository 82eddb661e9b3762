//! Blocking JSON-over-HTTP helper shared by the remote adapters.

use std::time::Duration;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum HttpFailure {
    Status { status: u16, body: String },
    Timeout,
    Transport(String),
}

/// Reads a bearer token from the named environment variable, if any.
pub(crate) fn token_from_env(var: Option<&str>) -> Option<String> {
    var.and_then(|name| std::env::var(name).ok()).filter(|t| !t.is_empty())
}

/// POSTs `body` and returns the response text of a 2xx reply.
pub(crate) fn post_json(
    url: &str,
    token: Option<&str>,
    body: &serde_json::Value,
    timeout: Duration,
) -> Result<String, HttpFailure> {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build();
    let agent = ureq::Agent::new_with_config(config);
    let mut request = agent.post(url).header("content-type", "application/json");
    if let Some(token) = token {
        request = request.header("authorization", format!("Bearer {token}"));
    }
    let payload = serde_json::to_vec(body).expect("json values serialize");
    let mut response = request.send(&payload[..]).map_err(classify)?;
    let status = response.status().as_u16();
    let text = response.body_mut().read_to_string().map_err(classify)?;
    if (200..300).contains(&status) {
        Ok(text)
    } else {
        Err(HttpFailure::Status { status, body: text })
    }
}

fn classify(err: ureq::Error) -> HttpFailure {
    match err {
        ureq::Error::Timeout(_) => HttpFailure::Timeout,
        ureq::Error::Io(e) if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
            HttpFailure::Timeout
        }
        other => HttpFailure::Transport(other.to_string()),
    }
}

/// Looks up a dotted path (`a.b.0.c`) inside a JSON value.
pub(crate) fn lookup<'a>(value: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    if path.is_empty() {
        return Some(value);
    }
    path.split('.').try_fold(value, |v, seg| match v {
        serde_json::Value::Object(map) => map.get(seg),
        serde_json::Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get(i)),
        _ => None,
    })
}
