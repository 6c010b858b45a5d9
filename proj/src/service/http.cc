// Copyright 2026 The Viscade Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "viscade/service/http.h"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <charconv>

namespace viscade::service {
namespace {

void send(httplib::Response& res, const HttpReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body, reply.content_type);
}

std::optional<std::string> form_value(const httplib::Request& req, const std::string& key) {
  if (req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorCode::kMalformedRequest,
          "field '" + key + "' is not a number: '" + text + "'");
  return value;
}

UploadFields upload_fields(const httplib::Request& req) {
  UploadFields f;
  if (auto v = form_value(req, "crop")) {
    try {
      f.crop = parse_crop(nlohmann::json::parse(*v));
    } catch (const nlohmann::json::exception&) {
      throw_error(ErrorCode::kMalformedRequest, "crop must be JSON {x0,y0,x1,y1}");
    }
  }
  if (auto v = form_value(req, "top_k")) {
    const auto k = parse_number<long long>("top_k", *v);
    require(k >= 1, ErrorCode::kMalformedRequest, "top_k must be at least 1");
    f.top_k = static_cast<std::size_t>(k);
  }
  if (auto v = form_value(req, "deadline_ms")) f.deadline_ms = parse_number<double>("deadline_ms", *v);
  if (auto v = form_value(req, "exact_l2")) f.exact_l2 = (*v == "true" || *v == "1");
  f.metadata_text = form_value(req, "metadata_text");
  f.category = form_value(req, "category");
  return f;
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<const SearchService> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  server_->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  server_->Post("/v1/search", [this](const httplib::Request& req, httplib::Response& res) {
    if (req.is_multipart_form_data()) {
      if (!req.has_file("image")) {
        send(res, error_reply(ErrorCode::kMalformedRequest, "multipart upload needs an 'image' part"));
        return;
      }
      UploadFields fields;
      try {
        fields = upload_fields(req);
      } catch (const Error& e) {
        send(res, error_reply(e.code(), e.what()));
        return;
      }
      send(res, service_->handle_search_upload(req.get_file_value("image").content, fields));
      return;
    }
    const auto type = req.get_header_value("Content-Type");
    if (type.rfind("image/", 0) == 0 || type == "application/octet-stream") {
      UploadFields fields;
      try {
        fields = upload_fields(req);
      } catch (const Error& e) {
        send(res, error_reply(e.code(), e.what()));
        return;
      }
      send(res, service_->handle_search_upload(req.body, fields));
      return;
    }
    send(res, service_->handle_search_json(req.body));
  });
  server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    send(res, service_->handle_health());
  });
  server_->Get(R"(/v1/doc/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, service_->handle_doc(req.matches[1]));
  });
  server_->Get(R"(/v1/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, service_->handle_image(req.matches[1]));
  });
  server_->set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        send(res, error_reply(ErrorCode::kIo, what));
      });
  server_->set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

int HttpServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    require(bound > 0, ErrorCode::kIo, "could not bind " + host);
  } else {
    require(server_->bind_to_port(host, port), ErrorCode::kIo,
            "could not bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpServer::serve(const std::string& host, int port) {
  spdlog::info("listening on {}:{}", host, port);
  require(server_->listen(host, port), ErrorCode::kIo,
          "could not listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace viscade::service
