#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"

#include "angio/config.hpp"
#include "angio/image_io.hpp"
#include "angio/interactive.hpp"
#include "angio/pipeline.hpp"
#include "angio/report.hpp"

namespace angio {

struct StoredContext {
  std::string id;
  ImageContext ctx;
  Config cfg;
  std::chrono::system_clock::time_point created;
};

/// Thread-safe id -> context map that evicts the least recently used entry.
class ContextStore {
 public:
  explicit ContextStore(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw Error(ErrorKind::InvalidArgument, "context store capacity must be positive");
  }

  std::shared_ptr<const StoredContext> insert(ImageContext ctx, const Config& cfg) {
    auto stored = std::make_shared<StoredContext>();
    stored->id = "ctx-" + std::to_string(++counter_);
    stored->ctx = std::move(ctx);
    stored->cfg = cfg;
    stored->created = std::chrono::system_clock::now();
    std::lock_guard lock(mutex_);
    order_.push_front(stored->id);
    entries_[stored->id] = {stored, order_.begin()};
    while (entries_.size() > capacity_) {
      entries_.erase(order_.back());
      order_.pop_back();
    }
    return stored;
  }

  std::shared_ptr<const StoredContext> find(const std::string& id) {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(id);
    if (it == entries_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second.position);
    return it->second.context;
  }

  std::size_t size() {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  struct Entry {
    std::shared_ptr<const StoredContext> context;
    std::list<std::string>::iterator position;
  };
  std::size_t capacity_;
  std::atomic<std::uint64_t> counter_{0};
  std::mutex mutex_;
  std::list<std::string> order_;  // most recent first
  std::unordered_map<std::string, Entry> entries_;
};

/// JSON-over-HTTP front end under /v1. Contexts live only in memory, so a
/// restart invalidates every id.
class Service {
 public:
  explicit Service(Config cfg) : cfg_(std::move(cfg)), store_(static_cast<std::size_t>(cfg_.lru_capacity)) {}

  ContextStore& store() { return store_; }

  void install(httplib::Server& server) {
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });
    server.Post("/v1/contexts", [this](const httplib::Request& req, httplib::Response& res) { create(req, res); });
    server.Post(R"(/v1/contexts/([^/]+)/auto)",
                [this](const httplib::Request& req, httplib::Response& res) { with_context(req, res, &Service::auto_run); });
    server.Post(R"(/v1/contexts/([^/]+)/segment)",
                [this](const httplib::Request& req, httplib::Response& res) { with_context(req, res, &Service::segment); });
    server.Get(R"(/v1/contexts/([^/]+)/image)",
               [this](const httplib::Request& req, httplib::Response& res) { with_context(req, res, &Service::image); });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    });
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message,
                         nlohmann::json extra = nlohmann::json::object()) {
    extra["error"] = kind;
    extra["message"] = message;
    send_json(res, status, extra);
  }

 private:
  using Handler = void (Service::*)(const StoredContext&, const httplib::Request&, httplib::Response&);

  void with_context(const httplib::Request& req, httplib::Response& res, Handler h) {
    const auto stored = store_.find(req.matches[1].str());
    if (!stored) return send_error(res, 404, "not_found", "unknown context id");
    (this->*h)(*stored, req, res);
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    GrayImage img;
    try {
      img = decode_gray_image(Bytes(req.body.begin(), req.body.end()));
    } catch (const Error& e) {
      return send_error(res, 400, to_string(e.kind()), e.what());
    }
    std::shared_ptr<const StoredContext> stored;
    {
      std::lock_guard lock(create_mutex_);
      stored = store_.insert(prepare_image(img, cfg_), cfg_);
    }
    send_json(res, 200,
              {{"id", stored->id},
               {"width", img.width()},
               {"height", img.height()},
               {"preview", "/v1/contexts/" + stored->id + "/image"},
               {"ridge_points", stored->ctx.ridges.size()},
               {"contour", to_json(stored->ctx.contour)}});
  }

  void auto_run(const StoredContext& s, const httplib::Request&, httplib::Response& res) {
    StageTimer timer;
    AutoAnalysis a;
    try {
      a = run_auto(s.ctx, s.cfg, &timer);
    } catch (const Error& e) {
      return send_error(res, 422, to_string(e.kind()), e.what());
    }
    std::string timing;
    for (const auto& [name, ms] : timer.stages()) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%s%s;dur=%.3f", timing.empty() ? "" : ", ", name.c_str(), ms);
      timing += buf;
    }
    res.set_header("Server-Timing", timing);
    send_json(res, 200, report_json(s.id, s.ctx, a));
  }

  void segment(const StoredContext& s, const httplib::Request& req, httplib::Response& res) {
    InteractiveRequest r;
    try {
      const auto body = nlohmann::json::parse(req.body);
      auto point = [&](const char* key) {
        const auto& v = body.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
          throw Error(ErrorKind::InvalidArgument, std::string("'") + key + "' must be [x, y]");
        }
        return Point2{v[0].get<double>(), v[1].get<double>()};
      };
      r.start_click = point("start");
      r.end_click = point("end");
    } catch (const nlohmann::json::exception& e) {
      return send_error(res, 400, "malformed_body", e.what());
    } catch (const Error& e) {
      return send_error(res, 400, "malformed_body", e.what());
    }
    try {
      send_json(res, 200, to_json(track_segment(s.ctx.stages.tracking, s.ctx.ridges, s.ctx.contour, r, s.cfg)));
    } catch (const UnreachableEndpoint& e) {
      send_error(res, 422, "unreachable", e.what(),
                 {{"forward", to_json(e.forward())}, {"backward", to_json(e.backward())}});
    } catch (const Error& e) {
      const int status = e.kind() == ErrorKind::InvalidArgument ? 400 : 422;
      send_error(res, status, to_string(e.kind()), e.what());
    }
  }

  void image(const StoredContext& s, const httplib::Request&, httplib::Response& res) {
    const Bytes png = encode_png(s.ctx.stages.equalized);
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  Config cfg_;
  ContextStore store_;
  std::mutex create_mutex_;
};

/// Blocks serving on host:port; `static_dir`, when nonempty, is mounted at /.
inline bool serve(const Config& cfg, const std::string& host, int port, const std::string& static_dir = {}) {
  httplib::Server server;
  Service service(cfg);
  service.install(server);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    throw Error(ErrorKind::NotFound, "static directory not found: " + static_dir);
  }
  return server.listen(host, port);
}

}  // namespace angio
