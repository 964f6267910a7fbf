use std::net::SocketAddr;
use std::path::Path;

use digstack_core::digcovery::DEFAULT_CACHE_CAPACITY;
use serde::Deserialize;

/// Settings for the digcovery daemon, read from a TOML file:
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// dns_listen = "127.0.0.1:5353"
/// cache_capacity = 1024
/// ```
///
/// Every key is optional. Omit `dns_listen` to run without the DNS front.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigcoveryConfig {
    pub listen: SocketAddr,
    pub dns_listen: Option<SocketAddr>,
    pub cache_capacity: usize,
}

impl Default for DigcoveryConfig {
    fn default() -> Self {
        DigcoveryConfig {
            listen: ([127, 0, 0, 1], 8080).into(),
            dns_listen: Some(([127, 0, 0, 1], 5353).into()),
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

impl DigcoveryConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: DigcoveryConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cache_capacity == 0 {
            return Err("cache_capacity must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = DigcoveryConfig::from_toml("cache_capacity = 64\n").unwrap();
        assert_eq!(c.cache_capacity, 64);
        assert_eq!(c.listen, DigcoveryConfig::default().listen);
    }

    #[test]
    fn rejects_unknown_keys_and_zero_capacity() {
        assert!(DigcoveryConfig::from_toml("listen_addr = \"x\"").is_err());
        assert!(DigcoveryConfig::from_toml("cache_capacity = 0").is_err());
        assert!(DigcoveryConfig::from_toml("listen = \"nope\"").is_err());
    }
}
