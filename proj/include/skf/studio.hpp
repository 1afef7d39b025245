// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "skf/field.hpp"

namespace skf {

struct StudioOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string static_dir;  // UI bundle served at /
  std::string state_dir;   // when set, sessions persist base/edited fields and sketches here
  int preview_every = 50;
  int preview_size = 128;
};

// HTTP service for the sketch studio. Routes live under /api/v1.
class Studio {
 public:
  explicit Studio(StudioOptions opts);
  ~Studio();
  Studio(const Studio&) = delete;
  Studio& operator=(const Studio&) = delete;

  // Binds the socket and returns the bound port; serving starts with run().
  int bind();
  // Blocks until stop().
  void run();
  void stop();

  // Registers a session around `base` and returns its id.
  std::string add_session(RadianceField base);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace skf
