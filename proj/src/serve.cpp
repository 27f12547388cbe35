#include "probdet/serve.hpp"

#include "probdet/error.hpp"

#include <httplib.h>
#include <json.hpp>

namespace probdet {

using nlohmann::json;

struct ScoringServer::Impl {
    TrainedPipeline pipeline;
    httplib::Server server;

    Impl(TrainedPipeline p, std::size_t max_body_bytes) : pipeline(std::move(p)) {
        server.set_payload_max_length(max_body_bytes);

        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            json body{{"status", "ok"}, {"model_kind", to_string(pipeline.spec.kind)}};
            res.set_content(body.dump(), "application/json");
        });

        server.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object() || !body.contains("text") ||
                !body["text"].is_string()) {
                res.status = 400;
                res.set_content(R"({"error":"body must be a JSON object with a string 'text'"})",
                                "application/json");
                return;
            }
            try {
                Prediction p = pipeline.predict_text(body["text"].get<std::string>());
                json out{{"label", p.label}, {"score", p.score}};
                res.set_content(out.dump(), "application/json");
            } catch (const Error& e) {
                res.status = 422;
                res.set_content(json{{"error", e.what()}}.dump(), "application/json");
            }
        });
    }
};

ScoringServer::ScoringServer(TrainedPipeline pipeline, std::size_t max_body_bytes) {
    if (!pipeline.can_score_text()) {
        throw Error("serve: model kind '" + to_string(pipeline.spec.kind) +
                    "' cannot score raw text");
    }
    impl_ = std::make_unique<Impl>(std::move(pipeline), max_body_bytes);
}

ScoringServer::~ScoringServer() {
    if (impl_) impl_->server.stop();
}

bool ScoringServer::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int ScoringServer::bind_any_port(const std::string& host) {
    return impl_->server.bind_to_any_port(host);
}

bool ScoringServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void ScoringServer::wait_until_ready() const {
    impl_->server.wait_until_ready();
}

void ScoringServer::stop() { impl_->server.stop(); }

const TrainedPipeline& ScoringServer::pipeline() const { return impl_->pipeline; }

}  // namespace probdet
