#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "facepaste/raster.hpp"
#include "facepaste/similarity.hpp"
#include "facepaste/toy_faces.hpp"

namespace facepaste {

struct QueryResult {
  double confidence = 0.0;
  double stealthiness = 0.0;
  std::optional<std::vector<double>> probabilities;
  int query_index = 0;
};

struct SimOracleConfig {
  int embed_size = 64;      // grayscale downsample resolution
  double temperature = 20.0;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual QueryResult query(const RasterImage& img, int source_id, int target_id) = 0;
};

// embedding shared by classifier and gradient: L2-normalized flattened
// embed_size x embed_size grayscale downsample, all in double precision
std::vector<double> embed_image(const RasterImage& img, int embed_size);

// template cosine-similarity classifier: p = softmax(temperature * cosine)
std::vector<double> classify(const RasterImage& img, const FaceSet& faces,
                             const SimOracleConfig& cfg = {});

class SimulatedOracle : public Oracle {
 public:
  explicit SimulatedOracle(FaceSet faces, SimOracleConfig cfg = {});

  // confidence = p[target], stealthiness = ssim(img, faces[source]); query_index 0
  QueryResult query(const RasterImage& img, int source_id, int target_id) override;

  std::vector<double> classify(const RasterImage& img) const;

  // analytic d(log p[target]) / d(pixel), chained through luma, downsample,
  // normalization, cosine, softmax; same shape as the input
  RasterImage gradient_log_confidence(const RasterImage& img, int target_id) const;

  const FaceSet& faces() const { return faces_; }
  const SimOracleConfig& config() const { return cfg_; }

 private:
  FaceSet faces_;
  SimOracleConfig cfg_;
  std::vector<std::vector<double>> templates_;
};

// per-attack budget enforcement; assigns 1-based query_index
class BudgetedOracle : public Oracle {
 public:
  BudgetedOracle(Oracle& inner, int budget);
  QueryResult query(const RasterImage& img, int source_id, int target_id) override;
  int queries_used() const { return used_.load(); }
  int budget() const { return budget_; }

 private:
  Oracle& inner_;
  int budget_;
  std::atomic<int> used_{0};
};

struct RemoteFieldMap {
  std::string confidence = "confidence";
  std::string stealthiness = "stealthiness";
  std::string probabilities = "probabilities";
  std::string queries_used = "queries_used";
};

struct RemoteOracleConfig {
  std::string url;  // e.g. http://127.0.0.1:8080
  RemoteFieldMap fields;
  int max_retries = 3;
  double backoff_initial_s = 0.5;  // doubles per retry
  std::string api_key;             // empty -> read FACEPASTE_API_KEY
};

class RemoteOracle : public Oracle {
 public:
  explicit RemoteOracle(RemoteOracleConfig cfg);
  ~RemoteOracle() override;

  // transport failures retried with exponential backoff, then TransportError;
  // HTTP 429 -> BudgetExhaustedError, 400/404 -> InvalidParameterError
  QueryResult query(const RasterImage& img, int source_id, int target_id) override;

 private:
  RemoteOracleConfig cfg_;
  struct Client;
  std::unique_ptr<Client> client_;
};

// serves a SimulatedOracle over the wire contract; budget tracked per
// (api key, source, target)
class OracleServer {
 public:
  OracleServer(SimulatedOracle oracle, int budget);
  ~OracleServer();

  // port 0 picks a free port; returns the bound port or throws ConfigError
  int bind(const std::string& host, int port);
  void run();              // blocks until stop()
  void start_background(); // bind() first
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace facepaste
