#include <json.hpp>

#include "geossl/train.hpp"

namespace geossl::train {

std::string report_json(const GapReport& r, int indent) {
  nlohmann::ordered_json j;
  j["train_risk"] = r.train_risk;
  j["test_risk"] = r.test_risk;
  j["gap"] = r.gap;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["n"] = r.n;
  j["p"] = r.p;
  j["q"] = r.q;
  j["seed"] = r.seed;
  j["wall_time"] = r.wall_time;
  return j.dump(indent);
}

}  // namespace geossl::train
