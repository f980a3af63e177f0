//! Parse one decoded manifest and list the intents it declares.
//!
//! `cargo run --example parse_manifest [path/to/AndroidManifest.xml]`

use intent_ids::manifest::parse_manifest_file;
use intent_ids::{parse_manifest, Label};

const SAMPLE: &str = r#"<manifest xmlns:android="http://schemas.android.com/apk/res/android" package="com.example.sms">
  <application>
    <receiver android:name=".SmsHook">
      <intent-filter android:priority="1000">
        <action android:name="android.provider.Telephony.SMS_RECEIVED"/>
        <action android:name="android.intent.action.BOOT_COMPLETED"/>
      </intent-filter>
    </receiver>
    <activity android:name=".Main">
      <intent-filter>
        <action android:name="android.intent.action.MAIN"/>
        <category android:name="android.intent.category.LAUNCHER"/>
      </intent-filter>
    </activity>
  </application>
</manifest>"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sample = match std::env::args().nth(1) {
        Some(path) => parse_manifest_file(path.as_ref(), None, Label::Unlabeled)?,
        None => parse_manifest(SAMPLE, "com.example.sms", Label::Unlabeled)?,
    };
    println!("{} declares {} intent occurrences", sample.app_id, sample.total());
    for (key, count) in &sample.intents {
        println!("  {:<8} {:<40} x{count}", key.kind.as_str(), key.name);
    }
    Ok(())
}
