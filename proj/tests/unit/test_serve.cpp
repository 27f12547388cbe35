#include "probdet/serve.hpp"

#include "probdet/error.hpp"
#include "support/helpers.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <thread>

using namespace probdet;
using nlohmann::json;

namespace {

struct RunningServer {
    ScoringServer server;
    int port;
    std::thread worker;

    explicit RunningServer(TrainedPipeline pipeline, std::size_t max_body = 65536)
        : server(std::move(pipeline), max_body), port(server.bind_any_port("127.0.0.1")) {
        worker = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~RunningServer() {
        server.stop();
        worker.join();
    }
};

TrainedPipeline trained_logreg() {
    Corpus corpus = generate_synthetic(80, 0.0, 12);
    PipelineSpec spec = PipelineSpec::defaults(ModelKind::logreg);
    spec.seed = 3;
    return train_pipeline(spec, corpus.items);
}

}  // namespace

TEST_CASE("health endpoint reports the model kind") {
    RunningServer rs(trained_logreg());
    httplib::Client client("127.0.0.1", rs.port);
    auto res = client.Get("/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    json body = json::parse(res->body);
    CHECK(body["status"] == "ok");
    CHECK(body["model_kind"] == "logreg");
}

TEST_CASE("predict endpoint matches library predictions exactly") {
    TrainedPipeline pipe = trained_logreg();
    std::string blob = pipe.to_json_string();
    RunningServer rs(std::move(pipe));
    TrainedPipeline reference = TrainedPipeline::from_json_string(blob);

    httplib::Client client("127.0.0.1", rs.port);
    Corpus probes = generate_synthetic(40, 0.1, 99);
    for (const auto& item : probes.items) {
        auto res = client.Post("/predict", json{{"text", item.text}}.dump(), "application/json");
        REQUIRE(res);
        REQUIRE(res->status == 200);
        json body = json::parse(res->body);
        Prediction expected = reference.predict_text(item.text);
        CHECK(body["label"].get<int>() == expected.label);
        CHECK(body["score"].get<double>() == expected.score);
    }
}

TEST_CASE("empty text is a defined prediction") {
    TrainedPipeline pipe = trained_logreg();
    Prediction expected = pipe.predict_text("");  // scored from the empty feature vector
    RunningServer rs(std::move(pipe));
    httplib::Client client("127.0.0.1", rs.port);
    auto res = client.Post("/predict", R"({"text":""})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    json body = json::parse(res->body);
    CHECK(body["label"].get<int>() == expected.label);
    CHECK(body["score"].get<double>() == expected.score);

    // a zero-weight model ties at score 0 and labels the negative class
    LinearModel zeros;
    zeros.loss = LossKind::hinge;
    zeros.weights.assign(3, 0.0);
    SparseVector empty;
    empty.dim = 3;
    CHECK(predict_linear(zeros, empty).label == 0);
}

TEST_CASE("malformed, oversized and unknown requests map to 400/413/404") {
    RunningServer rs(trained_logreg(), 2048);
    httplib::Client client("127.0.0.1", rs.port);

    auto malformed = client.Post("/predict", "{", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);

    auto wrong_type = client.Post("/predict", R"({"text":42})", "application/json");
    REQUIRE(wrong_type);
    CHECK(wrong_type->status == 400);

    std::string huge = R"({"text":")" + std::string(4096, 'x') + R"("})";
    auto too_large = client.Post("/predict", huge, "application/json");
    REQUIRE(too_large);
    CHECK(too_large->status == 413);

    auto missing = client.Get("/nope");
    REQUIRE(missing);
    CHECK(missing->status == 404);
}

TEST_CASE("serve refuses models without a text path") {
    Corpus corpus;
    PrecomputedVectors store;
    Rng rng(1);
    for (int i = 0; i < 12; ++i) {
        std::string id = "c" + std::to_string(i);
        corpus.items.push_back({id, "text", i % 2});
        std::vector<double> v(768, 0.0);
        v[0] = i % 2 ? 1.0 : -1.0;
        store.by_id.emplace(id, std::move(v));
    }
    PipelineSpec spec = PipelineSpec::defaults(ModelKind::mlp);
    spec.net.mlp_hidden1 = 8;
    spec.net.mlp_hidden2 = 4;
    spec.train.max_epochs = 1;
    spec.train.patience = 0;
    TrainedPipeline pipe = train_pipeline(spec, corpus.items, nullptr, nullptr, &store);
    CHECK_THROWS_AS(ScoringServer(std::move(pipe)), Error);
}
