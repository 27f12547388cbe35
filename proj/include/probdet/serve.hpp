#pragma once

#include "probdet/pipeline.hpp"

#include <cstddef>
#include <memory>
#include <string>

namespace probdet {

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_body_bytes = 65536;
};

// Minimal scoring endpoint over an immutable loaded model.
//   POST /predict {"text": ...} -> {"label": 0|1, "score": number}
//   GET  /health               -> {"status": "ok", "model_kind": ...}
// Malformed JSON answers 400, oversized bodies 413, unknown paths 404.
class ScoringServer {
public:
    // Throws when the pipeline cannot score raw text (mlp kind).
    ScoringServer(TrainedPipeline pipeline, std::size_t max_body_bytes = 65536);
    ~ScoringServer();

    ScoringServer(const ScoringServer&) = delete;
    ScoringServer& operator=(const ScoringServer&) = delete;

    // Blocking serve loop.
    bool listen(const std::string& host, int port);

    // Test support: bind an ephemeral port, then run listen_after_bind()
    // from a worker thread and stop() when done.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

    const TrainedPipeline& pipeline() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace probdet
