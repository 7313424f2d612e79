/**
 * Copyright 2026 The aroface Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>

namespace aroface {

/*!
 * Index-parallel loop runner.
 *
 * Tasks must write only to slots addressed by their own index; any
 * reduction happens afterwards, in index order, on the calling thread. That
 * keeps every result independent of the worker count. If several tasks
 * throw, the exception from the lowest index is rethrown.
 */
class Workers {
 public:
  explicit Workers(int threads = 1);

  int threads() const { return threads_; }
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) const;

 private:
  int threads_;
};

}  // namespace aroface
