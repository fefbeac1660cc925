use vasekit_core::similarity::{EmbeddingVector, ProviderError, SimilarityProvider};

use crate::{ScorerClient, ScorerEndpointConfig, ScorerError, ServiceDescriptor};

/// Similarity provider backed by a remote embedding service.
pub struct RemoteProvider {
    client: ScorerClient,
    descriptor: ServiceDescriptor,
}

impl RemoteProvider {
    /// Builds a client and checks the service is up.
    pub fn connect(cfg: ScorerEndpointConfig) -> Result<Self, ScorerError> {
        let client = ScorerClient::new(cfg)?;
        let descriptor = client.health_check()?;
        Ok(Self::with_descriptor(client, descriptor))
    }

    pub fn with_descriptor(client: ScorerClient, descriptor: ServiceDescriptor) -> Self {
        Self { client, descriptor }
    }

    pub fn client(&self) -> &ScorerClient {
        &self.client
    }

    pub fn descriptor(&self) -> &ServiceDescriptor {
        &self.descriptor
    }
}

impl SimilarityProvider for RemoteProvider {
    /// The service's model name, which also tags every returned vector.
    fn tag(&self) -> &str {
        &self.descriptor.model
    }

    fn dimension(&self) -> usize {
        self.descriptor.dimension
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let vectors = self
            .client
            .fetch_embeddings(texts)
            .map_err(|e| ProviderError::with_source("remote embedding failed", e))?;
        if let Some(v) = vectors.iter().find(|v| v.dimension() != self.descriptor.dimension) {
            return Err(ProviderError::new(format!(
                "service advertised dimension {} but returned {}",
                self.descriptor.dimension,
                v.dimension()
            )));
        }
        Ok(vectors)
    }
}
