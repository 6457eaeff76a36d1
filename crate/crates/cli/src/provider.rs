use defsense_core::embedder::{
    CachedProvider, EmbeddingProvider, FallbackEmbedder, FileEmbeddings, RemoteEmbedder, RemoteEmbedderConfig,
};
use defsense_core::http::RetryPolicy;

use crate::config::{ProviderKind, RunConfig};
use crate::output::{input, Result};

pub type Provider = CachedProvider<Box<dyn EmbeddingProvider>>;

pub fn build_provider(config: &RunConfig) -> Result<Provider> {
    let p = &config.provider;
    let inner: Box<dyn EmbeddingProvider> = match config.provider_kind()? {
        ProviderKind::Fallback => Box::new(FallbackEmbedder::new(p.dim, p.hash_seed, p.window)),
        ProviderKind::File => {
            let path = p.path.as_deref().expect("validated");
            Box::new(FileEmbeddings::load(path).map_err(input)?)
        }
        ProviderKind::Remote => Box::new(RemoteEmbedder::new(RemoteEmbedderConfig {
            url: p.url.clone().expect("validated"),
            batch_size: p.batch_size,
            max_in_flight: p.max_in_flight,
            timeout: config.provider_timeout(),
            retry: RetryPolicy::default(),
        })),
    };
    Ok(CachedProvider::new(inner))
}
