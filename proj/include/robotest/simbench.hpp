#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robotest/camera.hpp"
#include "robotest/image.hpp"
#include "robotest/kinematics.hpp"
#include "robotest/vision.hpp"

namespace robotest::simbench {

struct MaskShape {
    enum class Kind { Rect, Ellipse };
    Kind kind = Kind::Rect;
    Rect bounds; // ellipse = inscribed in bounds

    bool contains(const Vec2& device_px) const;
};

// Physical device description: screen size and resolution, placement pose in
// the arm base frame, optional irregular-screen cutouts in screen pixels.
struct DeviceProfile {
    std::string id;
    double screen_w_mm = 60.0;
    double screen_h_mm = 120.0;
    int res_x = 300;
    int res_y = 600;
    Vec2 placement_origin_mm{150.0, 40.0}; // screen top-left in the arm frame
    double placement_deflection_rad = 0.0;
    std::vector<MaskShape> mask;

    double mm_per_px() const { return screen_w_mm / res_x; }
    bool has_mask() const { return !mask.empty(); }
    bool in_mask(const Vec2& device_px) const;
    DeviceProfile without_mask() const;

    Vec2 world_from_device_px(const Vec2& px) const;
    Vec2 device_px_from_world(const Vec2& world_mm) const;

    // Moves the placement origin so the screen center sits at `center_world`
    // for the current deflection.
    void place_center(const Vec2& center_world);

    void validate() const;
    static DeviceProfile load_json(const std::string& path);
    void save_json(const std::string& path) const;
};

enum class WidgetStyle { Outline, Filled, Field };

struct ModelWidget {
    std::string id;
    vision::WidgetKind kind = vision::WidgetKind::NonText;
    Rect bounds; // device px
    std::string text;
    int text_scale = 2;
    bool clickable = true;
    bool input = false;
    WidgetStyle style = WidgetStyle::Outline;
};

struct ScreenDef {
    std::string name;
    uint8_t background = 235;
    std::vector<ModelWidget> widgets;

    const ModelWidget* find_widget(const std::string& id) const;
};

struct TransitionKey {
    std::string screen;
    std::string widget; // empty for screen-level gestures
    kinematics::GestureKind gesture = kinematics::GestureKind::Click;

    auto operator<=>(const TransitionKey&) const = default;
};

// Declarative GUI state machine standing in for an instrumented app.
struct AppModel {
    std::string name;
    std::string initial_screen;
    std::map<std::string, ScreenDef> screens;
    std::map<TransitionKey, std::string> transitions;
    std::set<TransitionKey> crash_triggers;

    void validate() const; // endpoints, id uniqueness, reachability
    static AppModel load_json(const std::string& path);
    void save_json(const std::string& path) const;
};

struct Response {
    enum class Kind { Transition, None, Crash };
    Kind kind = Kind::None;
    std::optional<std::string> next_screen;
};

struct SoftKeyboard {
    std::map<char, Rect> keys; // device px
    bool visible = false;

    static SoftKeyboard layout_for(const DeviceProfile& device);
    static SoftKeyboard layout_for_size(int res_x, int res_y);
    std::map<char, Vec2> key_centers() const;
};

struct RenderResult {
    Image image;                          // device-resolution grayscale
    std::vector<ModelWidget> ground_truth; // unmasked widget list
};

RenderResult render_screen(const AppModel& app, const std::string& screen,
                           const DeviceProfile& device, const SoftKeyboard* keyboard = nullptr);

struct CameraRig {
    camera::CameraIntrinsics intrinsics{1000.0, 1000.0, 640.0, 360.0, 0.0, 0.0};
    camera::CameraPose pose = camera::look_down_pose({180.0, 100.0}, 200.0);
};

struct SceneConfig {
    int photo_w = 1280;
    int photo_h = 720;
    uint8_t background_level = 90;
    double illumination_gradient = 0.12; // multiplicative ramp across x
    double noise_sigma = 0.0;
    uint64_t noise_seed = 0;
};

struct PhotoResult {
    Image photo;
    std::array<Vec2, 4> true_corners; // screen corners in photo px
};

PhotoResult synthesize_photo(const Image& screen_img, const DeviceProfile& device,
                             const CameraRig& rig, const SceneConfig& scene);

// Pure response semantics: mask swallow, crash triggers, transition lookup.
// Gesture targets are device pixels.
Response apply_operation(const AppModel& app, const std::string& current,
                         const DeviceProfile& device, const kinematics::CompoundGesture& gesture);

// Resolves the topmost ground-truth widget under a point (mask ignored);
// returns nullptr on background.
const ModelWidget* resolve_widget(const ScreenDef& screen, const Vec2& device_px);

// One device under exploration: model + current state + keyboard + focus.
class AppSession {
public:
    AppSession(AppModel model, DeviceProfile device);

    const AppModel& model() const { return model_; }
    const DeviceProfile& device() const { return device_; }
    const std::string& current_screen() const { return current_; }
    bool keyboard_visible() const { return keyboard_.visible; }
    const SoftKeyboard& keyboard() const { return keyboard_; }
    const std::string& field_text(const std::string& widget_id) const;

    void reset();
    void set_screen(const std::string& screen); // resync hook for comparisons
    void show_keyboard(bool visible);

    // Applies a gesture whose targets are device pixels, advancing state.
    Response apply(const kinematics::CompoundGesture& gesture);

    RenderResult render() const;
    PhotoResult photograph(const CameraRig& rig, const SceneConfig& scene,
                           uint64_t photo_seed) const;

private:
    AppModel model_;
    DeviceProfile device_;
    std::string current_;
    SoftKeyboard keyboard_;
    std::string focused_field_;
    std::map<std::string, std::string> field_text_;
};

} // namespace robotest::simbench
