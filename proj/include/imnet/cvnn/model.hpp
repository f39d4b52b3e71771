// SPDX-License-Identifier: Apache-2.0
//
// imnet: index-modulation MIMO detection toolkit
// Copyright (C) 2026 imnet contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "imnet/cvnn/layers.hpp"

namespace imnet::cvnn {

/// Layer-sequential network. A residual_add layer adds the model input to
/// the running activation.
class Model {
public:
    Model() = default;
    Model(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed) : input_(input), specs_(std::move(specs))
    {
        detail::require(input_.size() > 0, "Model: empty input shape");
        Rng rng(Rng::derive(seed, 0x4D4F44454CULL));
        Shape cur = input_;
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            if (specs_[i].kind == LayerKind::residual_add && !(cur == input_))
                throw InvalidArgument("Model: residual_add at layer " + std::to_string(i) + " sees " + cur.str() +
                                      " but the input is " + input_.str());
            layers_.push_back(make_layer(specs_[i], cur, rng));
            cur = layers_.back()->output_shape();
        }
        output_ = cur;
    }

    Model(const Model& o) : Model(o.input_, o.specs_, 0) { restore(o.state()); }
    Model& operator=(const Model& o)
    {
        if (this != &o) {
            Model tmp(o);
            *this = std::move(tmp);
        }
        return *this;
    }
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    Shape input_shape() const noexcept { return input_; }
    Shape output_shape() const noexcept { return output_; }
    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    std::size_t size() const noexcept { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    Tensor forward(const Tensor& x, Mode mode)
    {
        if (!(x.shape == input_))
            throw InvalidArgument("Model: expected input " + input_.str() + ", got " + x.shape.str());
        Tensor cur = x;
        for (auto& l : layers_) {
            cur = l->forward(cur, mode);
            if (l->kind() == LayerKind::residual_add)
                for (std::size_t i = 0; i < cur.data.size(); ++i) cur.data[i] += x.data[i];
        }
        batch_ = x.n;
        return cur;
    }

    /// Backpropagates dL/d(output); returns dL/d(input).
    Tensor backward(const Tensor& grad_out)
    {
        if (batch_ == 0 || grad_out.n != batch_) throw StateError("Model: backward called without a matching forward");
        if (!(grad_out.shape == output_)) throw InvalidArgument("Model: gradient shape mismatch");
        Tensor g = grad_out;
        Tensor skip(grad_out.n, input_);
        for (std::size_t i = layers_.size(); i-- > 0;) {
            if (layers_[i]->kind() == LayerKind::residual_add)
                for (std::size_t k = 0; k < g.data.size(); ++k) skip.data[k] += g.data[k];
            g = layers_[i]->backward(g);
        }
        for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] += skip.data[k];
        return g;
    }

    std::vector<Param*> params()
    {
        std::vector<Param*> out;
        for (auto& l : layers_)
            for (Param* p : l->params()) out.push_back(p);
        return out;
    }

    void zero_grad()
    {
        for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }

    /// Flat copy of all parameters and buffers, in checkpoint order.
    struct State {
        std::vector<std::vector<double>> params;
        std::vector<std::vector<double>> buffers;
        friend bool operator==(const State&, const State&) = default;
    };

    State state() const
    {
        State s;
        for (const auto& l : layers_) {
            for (Param* p : l->params()) s.params.push_back(p->value);
            for (auto* b : l->buffers()) s.buffers.push_back(*b);
        }
        return s;
    }

    void restore(const State& s)
    {
        std::size_t pi = 0, bi = 0;
        for (auto& l : layers_) {
            for (Param* p : l->params()) {
                if (pi >= s.params.size() || s.params[pi].size() != p->value.size())
                    throw InvalidArgument("Model::restore: parameter layout mismatch");
                p->value = s.params[pi++];
            }
            for (auto* b : l->buffers()) {
                if (bi >= s.buffers.size() || s.buffers[bi].size() != b->size())
                    throw InvalidArgument("Model::restore: buffer layout mismatch");
                *b = s.buffers[bi++];
            }
        }
        if (pi != s.params.size() || bi != s.buffers.size())
            throw InvalidArgument("Model::restore: state has extra entries");
    }

    /// Rounds every parameter and buffer to single precision, the on-disk
    /// representation, so that in-memory and reloaded models agree bitwise.
    void snap_to_storage()
    {
        auto snap = [](std::vector<double>& v) {
            for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
        };
        for (auto& l : layers_) {
            for (Param* p : l->params()) snap(p->value);
            for (auto* b : l->buffers()) snap(*b);
        }
    }

    /// Conv and dense kernel weights (no biases, no batch norm).
    std::uint64_t count_params() const
    {
        std::uint64_t n = 0;
        for (const auto& l : layers_) n += l->weight_count();
        return n;
    }

    /// Every trainable parameter (complex parameters count once per complex
    /// number, so complex and real slots compare on equal footing).
    std::uint64_t count_trainable() const
    {
        std::uint64_t n = 0;
        for (const auto& l : layers_)
            for (Param* p : l->params()) n += p->complex ? p->value.size() / 2 : p->value.size();
        return n;
    }

    /// Real FLOPs of one single-sample inference pass.
    std::uint64_t count_flops() const
    {
        std::uint64_t n = 0;
        for (const auto& l : layers_) n += l->flops();
        return n;
    }

private:
    Shape input_;
    Shape output_;
    std::vector<LayerSpec> specs_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::size_t batch_ = 0;
};

} // namespace imnet::cvnn
