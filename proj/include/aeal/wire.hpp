#pragma once

#include "aeal/error.hpp"
#include "aeal/linalg.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace aeal {

inline constexpr std::string_view kProtocolVersion = "aeal/1";

namespace msg {

struct Hello {
  std::string version;
  std::int64_t n = 0;
  std::string family;
  double lambda = 0.0;
  std::string mode;
  std::optional<int> t;                         // sketch width requested for screening
  std::optional<std::vector<std::string>> ids;  // align rows by identifier
};

struct HelloAck {
  std::string version;
  std::int64_t n = 0;
  std::optional<std::vector<std::string>> ids;  // common ids, in A's order
};

/// Everything in a SketchPackage except the projection seed.
struct SketchOffer {
  std::int64_t rows = 0;
  int t = 0;
  std::vector<double> projected;  // row-major, rows x t
  bool noised = false;
  std::optional<double> epsilon;
  std::optional<double> clip_bound;
  double noise_scale = 0.0;
  std::vector<int> rows_excluded;
};

struct ScreenResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
};

struct ResponseShare {
  std::vector<double> y;
  std::optional<double> flip_prob;  // present when y holds randomized responses
};

struct Offset {
  int round = 0;
  std::vector<double> nu;
  bool final = false;  // sender has stopped; receiver must not refit
};

struct GradShare {
  int round = 0;
  std::vector<double> grad;  // per-row loss derivative on the batch
};

struct VarianceShare {
  std::vector<double> sigma_sq;
};

struct PredictRequest {
  std::vector<std::string> ids;
};

struct PredictContribution {
  std::vector<double> nu;
  std::vector<double> sigma;
};

struct Stop {
  std::string reason;
};

struct Abort {
  std::string reason;
};

}  // namespace msg

using Message = std::variant<msg::Hello, msg::HelloAck, msg::SketchOffer, msg::ScreenResult, msg::ResponseShare,
                             msg::Offset, msg::GradShare, msg::VarianceShare, msg::PredictRequest,
                             msg::PredictContribution, msg::Stop, msg::Abort>;

inline std::string_view message_type(const Message& m) {
  static constexpr std::string_view names[] = {"Hello",     "HelloAck",      "SketchOffer",    "ScreenResult",
                                               "ResponseShare", "Offset",    "GradShare",      "VarianceShare",
                                               "PredictRequest", "PredictContribution", "Stop", "Abort"};
  return names[m.index()];
}

namespace wire {

/// 17 significant digits; always carries a '.' or exponent so the value
/// parses back as a double (keeps -0.0).
inline void put_double(std::string& out, double v) {
  if (!std::isfinite(v)) fail(Errc::ProtocolError, "cannot encode a non-finite number");
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  const std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
  out += s;
  if (s.find_first_of(".e") == std::string_view::npos) out += ".0";
}

inline void put_string(std::string& out, std::string_view s) { out += nlohmann::json(std::string(s)).dump(); }

class Writer {
 public:
  explicit Writer(std::string_view type) {
    out_ = "{\"type\":";
    put_string(out_, type);
  }

  Writer& num(std::string_view k, double v) {
    key(k);
    put_double(out_, v);
    return *this;
  }
  Writer& opt_num(std::string_view k, const std::optional<double>& v) { return v ? num(k, *v) : *this; }
  Writer& integer(std::string_view k, std::int64_t v) {
    key(k);
    out_ += std::to_string(v);
    return *this;
  }
  Writer& boolean(std::string_view k, bool v) {
    key(k);
    out_ += v ? "true" : "false";
    return *this;
  }
  Writer& str(std::string_view k, std::string_view v) {
    key(k);
    put_string(out_, v);
    return *this;
  }
  Writer& nums(std::string_view k, const std::vector<double>& v) {
    key(k);
    out_ += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out_ += ',';
      put_double(out_, v[i]);
    }
    out_ += ']';
    return *this;
  }
  Writer& ints(std::string_view k, const std::vector<int>& v) {
    key(k);
    out_ += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out_ += ',';
      out_ += std::to_string(v[i]);
    }
    out_ += ']';
    return *this;
  }
  Writer& strs(std::string_view k, const std::vector<std::string>& v) {
    key(k);
    out_ += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out_ += ',';
      put_string(out_, v[i]);
    }
    out_ += ']';
    return *this;
  }

  std::string finish() { return out_ + '}'; }

 private:
  void key(std::string_view k) {
    out_ += ',';
    put_string(out_, k);
    out_ += ':';
  }
  std::string out_;
};

/// Field access with the schema checks the decoder needs.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string_view type) : j_(j), type_(type) {}

  void allow(std::initializer_list<std::string_view> required, std::initializer_list<std::string_view> optional = {}) {
    for (auto k : required)
      if (!j_.contains(std::string(k))) bad("missing field '" + std::string(k) + "'");
    for (const auto& [k, v] : j_.items()) {
      if (k == "type") continue;
      bool known = false;
      for (auto r : required) known = known || k == r;
      for (auto o : optional) known = known || k == o;
      if (!known) bad("unknown field '" + k + "'");
    }
  }

  bool has(std::string_view k) const { return j_.contains(std::string(k)); }

  double num(std::string_view k) const { return as_double(at(k), k); }
  std::optional<double> opt_num(std::string_view k) const {
    return has(k) ? std::optional<double>(num(k)) : std::nullopt;
  }
  std::int64_t integer(std::string_view k) const {
    const auto& v = at(k);
    if (!v.is_number_integer()) bad("field '" + std::string(k) + "' must be an integer");
    return v.get<std::int64_t>();
  }
  bool boolean(std::string_view k) const {
    const auto& v = at(k);
    if (!v.is_boolean()) bad("field '" + std::string(k) + "' must be a boolean");
    return v.get<bool>();
  }
  std::string str(std::string_view k) const {
    const auto& v = at(k);
    if (!v.is_string()) bad("field '" + std::string(k) + "' must be a string");
    return v.get<std::string>();
  }
  std::vector<double> nums(std::string_view k) const {
    const auto& v = array(k);
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) out.push_back(as_double(e, k));
    return out;
  }
  std::vector<int> ints(std::string_view k) const {
    const auto& v = array(k);
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) bad("field '" + std::string(k) + "' must hold integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  std::vector<std::string> strs(std::string_view k) const {
    const auto& v = array(k);
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) bad("field '" + std::string(k) + "' must hold strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

 private:
  const nlohmann::json& at(std::string_view k) const {
    if (!has(k)) bad("missing field '" + std::string(k) + "'");
    return j_.at(std::string(k));
  }
  const nlohmann::json& array(std::string_view k) const {
    const auto& v = at(k);
    if (!v.is_array()) bad("field '" + std::string(k) + "' must be an array");
    return v;
  }
  double as_double(const nlohmann::json& v, std::string_view k) const {
    if (!v.is_number()) bad("field '" + std::string(k) + "' must be numeric");
    return v.get<double>();
  }
  [[noreturn]] void bad(const std::string& what) const { fail(Errc::ProtocolError, std::string(type_) + ": " + what); }

  const nlohmann::json& j_;
  std::string_view type_;
};

}  // namespace wire

/// One JSON object, no trailing newline.
inline std::string encode(const Message& m) {
  using wire::Writer;
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, msg::Hello>) {
          Writer w("Hello");
          w.str("version", v.version).integer("n", v.n).str("family", v.family).num("lambda", v.lambda).str("mode", v.mode);
          if (v.t) w.integer("t", *v.t);
          if (v.ids) w.strs("ids", *v.ids);
          return w.finish();
        } else if constexpr (std::is_same_v<T, msg::HelloAck>) {
          Writer w("HelloAck");
          w.str("version", v.version).integer("n", v.n);
          if (v.ids) w.strs("ids", *v.ids);
          return w.finish();
        } else if constexpr (std::is_same_v<T, msg::SketchOffer>) {
          Writer w("SketchOffer");
          w.integer("rows", v.rows).integer("t", v.t).nums("projected", v.projected).boolean("noised", v.noised);
          w.opt_num("epsilon", v.epsilon).opt_num("clip_bound", v.clip_bound).num("noise_scale", v.noise_scale);
          return w.ints("rows_excluded", v.rows_excluded).finish();
        } else if constexpr (std::is_same_v<T, msg::ScreenResult>) {
          return Writer("ScreenResult")
              .num("statistic", v.statistic)
              .integer("df", v.df)
              .num("p_value", v.p_value)
              .boolean("reject", v.reject)
              .num("alpha", v.alpha)
              .finish();
        } else if constexpr (std::is_same_v<T, msg::ResponseShare>) {
          return Writer("ResponseShare").nums("y", v.y).opt_num("flip_prob", v.flip_prob).finish();
        } else if constexpr (std::is_same_v<T, msg::Offset>) {
          Writer w("Offset");
          w.integer("round", v.round).nums("nu", v.nu);
          if (v.final) w.boolean("final", true);
          return w.finish();
        } else if constexpr (std::is_same_v<T, msg::GradShare>) {
          return Writer("GradShare").integer("round", v.round).nums("grad", v.grad).finish();
        } else if constexpr (std::is_same_v<T, msg::VarianceShare>) {
          return Writer("VarianceShare").nums("sigma_sq", v.sigma_sq).finish();
        } else if constexpr (std::is_same_v<T, msg::PredictRequest>) {
          return Writer("PredictRequest").strs("ids", v.ids).finish();
        } else if constexpr (std::is_same_v<T, msg::PredictContribution>) {
          return Writer("PredictContribution").nums("nu", v.nu).nums("sigma", v.sigma).finish();
        } else if constexpr (std::is_same_v<T, msg::Stop>) {
          return Writer("Stop").str("reason", v.reason).finish();
        } else {
          return Writer("Abort").str("reason", v.reason).finish();
        }
      },
      m);
}

inline Message decode(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::ProtocolError, std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    fail(Errc::ProtocolError, "message is not an object with a string 'type'");
  const std::string type = j["type"].get<std::string>();
  wire::Reader r(j, type);

  if (type == "Hello") {
    r.allow({"version", "n", "family", "lambda", "mode"}, {"t", "ids"});
    msg::Hello h{r.str("version"), r.integer("n"), r.str("family"), r.num("lambda"), r.str("mode"), {}, {}};
    if (r.has("t")) h.t = static_cast<int>(r.integer("t"));
    if (r.has("ids")) h.ids = r.strs("ids");
    return h;
  }
  if (type == "HelloAck") {
    r.allow({"version", "n"}, {"ids"});
    msg::HelloAck h{r.str("version"), r.integer("n"), {}};
    if (r.has("ids")) h.ids = r.strs("ids");
    return h;
  }
  if (type == "SketchOffer") {
    r.allow({"rows", "t", "projected", "noised", "noise_scale", "rows_excluded"}, {"epsilon", "clip_bound"});
    msg::SketchOffer s;
    s.rows = r.integer("rows");
    s.t = static_cast<int>(r.integer("t"));
    s.projected = r.nums("projected");
    s.noised = r.boolean("noised");
    s.epsilon = r.opt_num("epsilon");
    s.clip_bound = r.opt_num("clip_bound");
    s.noise_scale = r.num("noise_scale");
    s.rows_excluded = r.ints("rows_excluded");
    if (s.rows < 0 || s.t < 1 || static_cast<std::int64_t>(s.projected.size()) != s.rows * s.t)
      fail(Errc::ProtocolError, "SketchOffer: projected has wrong size");
    return s;
  }
  if (type == "ScreenResult") {
    r.allow({"statistic", "df", "p_value", "reject", "alpha"});
    return msg::ScreenResult{r.num("statistic"), static_cast<int>(r.integer("df")), r.num("p_value"), r.boolean("reject"),
                             r.num("alpha")};
  }
  if (type == "ResponseShare") {
    r.allow({"y"}, {"flip_prob"});
    return msg::ResponseShare{r.nums("y"), r.opt_num("flip_prob")};
  }
  if (type == "Offset") {
    r.allow({"round", "nu"}, {"final"});
    return msg::Offset{static_cast<int>(r.integer("round")), r.nums("nu"), r.has("final") && r.boolean("final")};
  }
  if (type == "GradShare") {
    r.allow({"round", "grad"});
    return msg::GradShare{static_cast<int>(r.integer("round")), r.nums("grad")};
  }
  if (type == "VarianceShare") {
    r.allow({"sigma_sq"});
    return msg::VarianceShare{r.nums("sigma_sq")};
  }
  if (type == "PredictRequest") {
    r.allow({"ids"});
    return msg::PredictRequest{r.strs("ids")};
  }
  if (type == "PredictContribution") {
    r.allow({"nu", "sigma"});
    return msg::PredictContribution{r.nums("nu"), r.nums("sigma")};
  }
  if (type == "Stop") {
    r.allow({"reason"});
    return msg::Stop{r.str("reason")};
  }
  if (type == "Abort") {
    r.allow({"reason"});
    return msg::Abort{r.str("reason")};
  }
  fail(Errc::ProtocolError, "unknown message type '" + type + "'");
}

inline msg::SketchOffer to_offer(const Matrix& projected, int t, bool noised, std::optional<double> epsilon,
                                 std::optional<double> clip_bound, double noise_scale, std::vector<int> rows_excluded) {
  msg::SketchOffer s;
  s.rows = projected.rows();
  s.t = t;
  s.projected.reserve(static_cast<std::size_t>(projected.size()));
  for (Eigen::Index i = 0; i < projected.rows(); ++i)
    for (Eigen::Index j = 0; j < projected.cols(); ++j) s.projected.push_back(projected(i, j));
  s.noised = noised;
  s.epsilon = epsilon;
  s.clip_bound = clip_bound;
  s.noise_scale = noise_scale;
  s.rows_excluded = std::move(rows_excluded);
  return s;
}

inline Matrix offer_matrix(const msg::SketchOffer& s) {
  Matrix m(s.rows, s.t);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = s.projected[static_cast<std::size_t>(i * s.t + j)];
  return m;
}

}  // namespace aeal
