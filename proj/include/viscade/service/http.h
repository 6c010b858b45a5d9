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

#ifndef VISCADE_SERVICE_HTTP_H_
#define VISCADE_SERVICE_HTTP_H_

#include <memory>
#include <string>
#include <thread>

#include "viscade/service/service.h"

namespace httplib {
class Server;
}

namespace viscade::service {

// HTTP front end: POST /v1/search, GET /v1/health, GET /v1/doc/{id},
// GET /v1/image/{id}. CORS is open for the browser client.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const SearchService> service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port; throws kIo when binding fails.
  int start(const std::string& host, int port);
  // Blocks until stop() is called from another thread or a signal handler.
  void serve(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  std::shared_ptr<const SearchService> service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace viscade::service

#endif  // VISCADE_SERVICE_HTTP_H_
